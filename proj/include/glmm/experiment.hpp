#pragma once

#include "glmm/baselines.hpp"
#include "glmm/em.hpp"
#include "glmm/serialization.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace glmm {

enum class Method { Glmm, Ghmm, Gmm, KMeansGl };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Per-method hyperparameters shared by every scenario.
struct Hyperparameters {
  SmoothSolverParams smooth;
  HeatSolverParams heat;
  /// Diffusion time assumed by the heat model while fitting.
  double ghmm_tau = 0.5;
  std::optional<double> epsilon;
  int restarts = 1;
  int max_iterations = 100;
  double convergence_tol = 1e-4;
  bool scale_priors_by_mass = true;
  double gmm_ridge = 1e-6;
  int kmeans_restarts = 10;
  /// Pick restarts by training-label NMSE instead of the objective.
  bool select_restart_by_labels = false;
};

Json to_json(const Hyperparameters& h);
/// Overrides the fields of `base` present in `j`; unknown keys throw.
Hyperparameters hyperparameters_from_json(const Json& j, Hyperparameters base = {});

struct ExperimentConfig {
  std::string scenario = "table1";
  int repetitions = 20;
  Seed base_seed{1};
  std::vector<Method> methods;
  Index n = 15;
  Index m = 150;
  double edge_probability = 0.7;
  /// Standard deviation of the cluster means.
  double mean_sigma = 0.5;
  /// One parameter point per entry (table1, table2, noisy_labels, custom).
  std::vector<std::vector<double>> alpha_settings;
  std::vector<double> tau_grid;
  std::vector<double> noise_grid;
  std::vector<double> prior_grid;
  std::vector<double> sigma_grid;
  std::vector<Index> dim_grid;
  /// Wishart scenarios: cluster count; custom: kernel (0 selects smooth).
  Index k = 2;
  double custom_tau = 0.0;
  Hyperparameters hp;
  std::filesystem::path output_dir;
  unsigned threads = 0;  // 0: hardware concurrency

  /// Protocol constants of a named scenario.
  static ExperimentConfig defaults(const std::string& scenario);
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

Json to_json(const ExperimentConfig& c);
/// Starts from the scenario defaults and overrides the fields present in `j`.
ExperimentConfig experiment_config_from_json(const Json& j);

struct ResultRow {
  std::string scenario;
  std::string method;
  std::string param_name;
  std::string param_value;
  int rep = 0;
  std::string metric;
  double value = 0.0;
  Seed seed;
};

struct FailureRecord {
  std::string method;
  std::string param_name;
  std::string param_value;
  int rep = 0;
  Seed seed;
  std::string reason;
};

struct SummaryEntry {
  std::string method;
  std::string param_name;
  std::string param_value;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int successes = 0;
  int failures = 0;
};

class ResultTable {
 public:
  void append(ResultRow row) { rows_.push_back(std::move(row)); }
  void append_failure(FailureRecord f) { failures_.push_back(std::move(f)); }
  void merge(ResultTable other);
  /// Orders rows by (method, parameter, rep, metric) so output does not
  /// depend on scheduling.
  void normalize();

  const std::vector<ResultRow>& rows() const { return rows_; }
  const std::vector<FailureRecord>& failures() const { return failures_; }

  std::string to_csv() const;
  std::vector<SummaryEntry> summarize() const;
  /// Values of one metric for (method, param_value), ordered by rep.
  std::vector<double> values(const std::string& method, const std::string& param_value,
                             const std::string& metric) const;
  /// Mean over successful reps; NaN when there are none.
  double mean(const std::string& method, const std::string& param_value, const std::string& metric) const;

 private:
  std::vector<ResultRow> rows_;
  std::vector<FailureRecord> failures_;
};

/// Number of parameter points of the configured scenario.
std::size_t parameter_point_count(const ExperimentConfig& config);
/// Label of a parameter point, as written to the param_value column.
std::string parameter_point_label(const ExperimentConfig& config, std::size_t point);

/// The dataset that repetition `rep` of parameter point `point` uses; the
/// truth graphs are empty for the Wishart scenarios.
struct ScenarioInstance {
  Dataset data;
  std::vector<Graph> truth;
};
ScenarioInstance scenario_instance(const ExperimentConfig& config, std::size_t point, int rep);

Json summary_to_json(const ExperimentConfig& config, const ResultTable& table);

/// Runs every (parameter point, repetition, method) of the scenario.
/// Repetition r uses split_seed(base_seed, r).
ResultTable run_experiment(const ExperimentConfig& config);

/// Writes results.csv, summary.json and config.json into config.output_dir.
void write_experiment(const ExperimentConfig& config, const ResultTable& table);

/// Output root: GLMM_OUTPUT_ROOT when set, otherwise the current directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

struct GridPoint {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double heat_beta = 0.0;
  double score = 0.0;
};

struct GridSearchSpec {
  std::vector<double> beta1 = {0.5, 1.0, 2.0, 5.0};
  std::vector<double> beta2 = {0.05, 0.2, 0.5, 2.0, 5.0};
  std::vector<double> heat_beta = {0.1, 1.0};
  /// nmse (lower is better) or f (higher is better).
  std::string objective = "nmse";
  Method method = Method::Glmm;
};

/// Evaluates the scenario on every grid point; results are ordered as the
/// grid and the best point is first in `ranking`.
struct GridSearchResult {
  std::vector<GridPoint> points;
  std::vector<GridPoint> ranking;
};
GridSearchResult grid_search(const ExperimentConfig& base, const GridSearchSpec& grid);

}  // namespace glmm
