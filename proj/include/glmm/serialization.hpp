#pragma once

#include "glmm/baselines.hpp"
#include "glmm/em.hpp"
#include "glmm/sampling.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace glmm {

using Json = nlohmann::ordered_json;

/// Method-independent view of a trained clustering model, which is what the
/// model JSON files hold. Fields a method does not produce stay empty.
struct ModelRecord {
  std::string method;  // glmm, ghmm, gmm, kmeans_gl or truth
  Vector alpha;
  std::vector<Vector> means;
  std::vector<Graph> graphs;
  KernelSpec kernel = KernelSpec::smooth();
  std::optional<double> epsilon;
  /// GMM only: covariances in the fitted space.
  std::vector<Matrix> covariances;
  bool projected = false;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  Seed seed;
  Json config = Json::object();

  Index k() const { return alpha.size(); }
  Index n() const { return means.empty() ? 0 : means.front().size(); }
};

ModelRecord record_from_fit(const FittedModel& model, const std::string& method, const Json& config);
ModelRecord record_from_gmm(const GmmModel& model, const Json& config, std::optional<Index> edge_count);
ModelRecord record_from_kmeans(const KMeansGraphResult& result, Index n, Seed seed, const Json& config);
ModelRecord record_from_spec(const MixtureModelSpec& spec);

/// Responsibilities of `signals` under a stored model: one E-step for the
/// graph mixtures and the GMM, nearest centre (one-hot) for K-means.
Matrix predict_record(const ModelRecord& model, const Matrix& signals);

Json to_json(const ModelRecord& model);
/// Graphs given as strings are read as files relative to `base_dir`.
ModelRecord model_from_json(const Json& j, const std::filesystem::path& base_dir = {});

Json kernel_to_json(const KernelSpec& kernel);
KernelSpec kernel_from_json(const Json& j);
Json graph_to_edge_list(const Graph& g);
Graph graph_from_edge_list(const Json& j, Index n);

Json fit_config_to_json(const FitConfig& config);

/// Reads and writes JSON files, naming the path in errors.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// M rows with one 0-based cluster index each.
Labels read_labels(const std::filesystem::path& path, std::optional<Index> k = std::nullopt);
void write_labels(const std::filesystem::path& path, const Labels& labels);

/// Dataset directory: signals.csv, labels.csv, graph_<k>.csv (edge lists) and
/// spec.json. Labels, graphs and spec are optional on read.
struct DatasetFiles {
  Dataset data;
  std::vector<Graph> truth_graphs;
};
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
DatasetFiles read_dataset(const std::filesystem::path& dir);

}  // namespace glmm
