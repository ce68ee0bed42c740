#pragma once

#include "glmm/graph.hpp"
#include "glmm/rng.hpp"
#include "glmm/sampling.hpp"
#include "glmm/solvers.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace glmm {

struct FitConfig {
  Index k = 2;
  KernelSpec kernel = KernelSpec::smooth();
  /// Spectral regulariser added to the retained smooth-model eigenvalues.
  /// Unset: 1e-6 times the mean positive eigenvalue of each L_k.
  std::optional<double> epsilon;
  int max_iterations = 100;
  /// Stop once max |gamma_new - gamma_old| drops below this.
  double convergence_tol = 1e-4;
  int restarts = 1;
  SmoothSolverParams smooth;
  /// tau is taken from `kernel`; the remaining fields configure the solver.
  HeatSolverParams heat;
  std::optional<EdgeMask> mask;
  double min_cluster_mass = 1.0;
  bool warm_start = true;
  /// Multiply the smooth-solver betas by each cluster's mass sum_m gamma_{m,k},
  /// which makes the learned graph scale independent of cluster size.
  bool scale_priors_by_mass = true;

  void validate() const;
};

/// M x K posterior cluster memberships.
struct Responsibilities {
  Matrix gamma;

  Index m() const { return gamma.rows(); }
  Index k() const { return gamma.cols(); }
  /// Entries in [0, 1] and rows summing to 1 within `tol`.
  bool is_row_stochastic(double tol = 1e-9) const;
};

/// Per-signal mixing coefficients: signal m uses prior.row(group_of[m]).
struct GroupPrior {
  std::vector<Index> group_of;
  Matrix prior;  // G x K, rows on the simplex
  /// Frozen priors are never re-estimated.
  bool frozen = false;

  void validate(Index m, Index k) const;
  /// One group per (noisy) label: `confidence` on the labelled cluster and
  /// the remainder spread evenly over the others.
  static GroupPrior from_labels(const Labels& labels, double confidence, bool frozen);
};

struct ModelState {
  Vector alpha;
  std::vector<Vector> means;
  std::vector<Graph> graphs;
  std::vector<Laplacian> laplacians;

  Index k() const { return alpha.size(); }
};

struct RestartDiagnostic {
  int restart = 0;
  Seed seed;
  bool ok = false;
  std::string message;
  double final_objective = 0.0;
  int iterations = 0;
};

struct FittedModel {
  Vector alpha;
  std::vector<Vector> means;
  std::vector<Graph> graphs;
  std::vector<Laplacian> laplacians;
  KernelSpec kernel = KernelSpec::smooth();
  std::optional<double> epsilon;
  Responsibilities gamma;
  /// Observed-data log-likelihood after every E-step (initial state first).
  std::vector<double> objective_trace;
  int iterations_used = 0;
  bool converged = false;
  /// Graph solves that hit their iteration cap.
  int solver_warnings = 0;
  int selected_restart = 0;
  Seed seed;
  std::optional<Matrix> group_prior;
  std::vector<RestartDiagnostic> restarts;

  ModelState state() const { return {alpha, means, graphs, laplacians}; }
  double final_objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<RestartDiagnostic> diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<RestartDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<RestartDiagnostic> diagnostics_;
};

/// Uniform alpha, distinct random data signals as means and Laplacians of
/// connected G(N, 0.7) graphs with uniform(0.1, 2) weights.
ModelState initialize(const Dataset& data, const FitConfig& config, Seed seed);

/// ln N(x_m | mu_k, g_k^2(L_k)) for every signal and cluster. The smooth
/// model evaluates the (N-1)-dimensional density on the span of the
/// non-constant eigenvectors with precision Lambda + epsilon.
Matrix log_densities(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                     std::optional<double> epsilon);

/// Log-domain normalisation of alpha_k N(x_m | k) (or the group prior).
Responsibilities e_step(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                        std::optional<double> epsilon, const GroupPrior* prior = nullptr);

/// sum_m ln sum_k alpha_k N(x_m | mu_k, g_k^2(L_k)), without graph priors.
double surrogate_objective(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                           std::optional<double> epsilon, const GroupPrior* prior = nullptr);

/// Weighted means; throws std::domain_error for a cluster with zero mass.
std::vector<Vector> m_step_means(const Responsibilities& gamma, const Matrix& signals);
/// alpha_k = sum_m gamma_{m,k} / M.
Vector m_step_weights(const Responsibilities& gamma);
/// Per-group average responsibilities.
Matrix m_step_group_prior(const Responsibilities& gamma, const GroupPrior& prior);

/// One graph-learning problem per cluster on y_{m,k} = x_m - mu_k with
/// weights gamma_{.,k}. Solver failures are rethrown naming the cluster.
std::vector<GraphEstimate> m_step_graphs(const Responsibilities& gamma, const Matrix& signals,
                                         const std::vector<Vector>& means, const FitConfig& config,
                                         const std::vector<Graph>* warm_start = nullptr);

/// Higher is better; the default selects the best final objective.
using RestartScore = std::function<double(const FittedModel&)>;

FittedModel fit(const Dataset& data, const FitConfig& config, Seed seed,
                const std::optional<GroupPrior>& prior = std::nullopt, const RestartScore& score = {});

/// One E-step under the trained parameters (global alpha).
Responsibilities predict(const FittedModel& model, const Matrix& signals);

}  // namespace glmm
