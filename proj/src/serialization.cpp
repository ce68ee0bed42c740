#include "glmm/serialization.hpp"

#include "glmm/graph_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace glmm {

namespace {

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string("model json: ") + what + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string("model json: ") + what + " must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) throw std::invalid_argument(std::string("model json: ragged ") + what);
    m.row(r) = row.transpose();
  }
  return m;
}

Index record_dimension(const ModelRecord& m) {
  if (!m.graphs.empty()) return m.graphs.front().size();
  return m.n() + (m.projected ? 1 : 0);
}

}  // namespace

Json kernel_to_json(const KernelSpec& kernel) {
  Json j;
  j["kind"] = kernel.name();
  if (kernel.kind() == KernelKind::Heat) j["tau"] = kernel.tau();
  return j;
}

KernelSpec kernel_from_json(const Json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "smooth") return KernelSpec::smooth();
  if (kind == "heat") return KernelSpec::heat(j.at("tau").get<double>());
  throw std::invalid_argument("unknown kernel '" + kind + "'");
}

Json graph_to_edge_list(const Graph& g) {
  Json edges = Json::array();
  for (Index j = 0; j < g.size(); ++j)
    for (Index i = 0; i < j; ++i)
      if (g.weight(i, j) > 0.0) edges.push_back(Json::array({i, j, g.weight(i, j)}));
  return edges;
}

Graph graph_from_edge_list(const Json& j, Index n) {
  Matrix w = Matrix::Zero(n, n);
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw std::invalid_argument("model json: edges must be [i, j, weight]");
    const auto a = e[0].get<Index>(), b = e[1].get<Index>();
    const auto weight = e[2].get<double>();
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw std::invalid_argument("model json: edge index out of range");
    w(a, b) = w(b, a) = weight;
  }
  return Graph(std::move(w));
}

Json fit_config_to_json(const FitConfig& c) {
  Json j;
  j["k"] = c.k;
  j["kernel"] = kernel_to_json(c.kernel);
  j["epsilon"] = c.epsilon ? Json(*c.epsilon) : Json(nullptr);
  j["max_iterations"] = c.max_iterations;
  j["convergence_tol"] = c.convergence_tol;
  j["restarts"] = c.restarts;
  j["smooth"] = {{"beta1", c.smooth.beta1},
                 {"beta2", c.smooth.beta2},
                 {"max_iterations", c.smooth.max_iterations},
                 {"tol", c.smooth.tol},
                 {"step_scale", c.smooth.step_scale}};
  j["heat"] = {{"beta", c.heat.beta},
               {"max_iterations", c.heat.max_iterations},
               {"tol", c.heat.tol},
               {"eig_floor", c.heat.eig_floor}};
  j["masked"] = c.mask.has_value();
  j["min_cluster_mass"] = c.min_cluster_mass;
  j["warm_start"] = c.warm_start;
  j["scale_priors_by_mass"] = c.scale_priors_by_mass;
  return j;
}

ModelRecord record_from_fit(const FittedModel& model, const std::string& method, const Json& config) {
  ModelRecord r;
  r.method = method;
  r.alpha = model.alpha;
  r.means = model.means;
  r.graphs = model.graphs;
  r.kernel = model.kernel;
  r.epsilon = model.epsilon;
  r.objective_trace = model.objective_trace;
  r.iterations = model.iterations_used;
  r.converged = model.converged;
  r.seed = model.seed;
  r.config = config;
  return r;
}

ModelRecord record_from_gmm(const GmmModel& model, const Json& config, std::optional<Index> edge_count) {
  ModelRecord r;
  r.method = "gmm";
  r.alpha = model.alpha;
  r.means = model.means;
  r.covariances = model.covariances;
  r.projected = model.projected;
  r.objective_trace = model.log_likelihood_trace;
  r.iterations = model.iterations_used;
  r.converged = true;
  r.seed = model.seed;
  r.config = config;
  if (edge_count)
    for (Index k = 0; k < model.alpha.size(); ++k) r.graphs.push_back(top_edges_from_precision(model.precision(k), *edge_count));
  return r;
}

ModelRecord record_from_kmeans(const KMeansGraphResult& result, Index n, Seed seed, const Json& config) {
  ModelRecord r;
  r.method = "kmeans_gl";
  const Labels& labels = result.clustering.labels;
  r.alpha = Vector::Zero(labels.k);
  for (Index c : labels.cluster) r.alpha(c) += 1.0;
  r.alpha /= static_cast<double>(labels.size());
  r.means = result.clustering.centers;
  for (const auto& g : result.graphs) r.graphs.push_back(g ? g->graph : Graph::empty(n));
  r.objective_trace = result.clustering.cost_trace;
  r.iterations = static_cast<int>(result.clustering.cost_trace.size());
  r.converged = true;
  r.seed = seed;
  r.config = config;
  return r;
}

ModelRecord record_from_spec(const MixtureModelSpec& spec) {
  ModelRecord r;
  r.method = "truth";
  r.alpha = Eigen::Map<const Vector>(spec.alpha.data(), static_cast<Index>(spec.alpha.size()));
  r.means = spec.means;
  for (const auto& l : spec.laplacians) r.graphs.push_back(l.graph());
  r.kernel = spec.kernel;
  r.converged = true;
  return r;
}

Matrix predict_record(const ModelRecord& model, const Matrix& signals) {
  if (signals.cols() != record_dimension(model))
    throw std::invalid_argument("predict: signals have " + std::to_string(signals.cols()) + " columns, model expects " +
                                std::to_string(record_dimension(model)));
  if (model.method == "gmm") {
    GmmModel g;
    g.alpha = model.alpha;
    g.means = model.means;
    g.covariances = model.covariances;
    g.projected = model.projected;
    return predict_gmm(g, signals).gamma;
  }
  if (model.method == "kmeans_gl") {
    Matrix out = Matrix::Zero(signals.rows(), model.k());
    for (Index m = 0; m < signals.rows(); ++m) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < model.k(); ++k) {
        const double d = (signals.row(m).transpose() - model.means[static_cast<std::size_t>(k)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      out(m, best) = 1.0;
    }
    return out;
  }
  ModelState state;
  state.alpha = model.alpha;
  state.means = model.means;
  state.graphs = model.graphs;
  for (const auto& g : model.graphs) state.laplacians.push_back(Laplacian::from_weights(g));
  return e_step(state, signals, model.kernel, model.epsilon).gamma;
}

Json to_json(const ModelRecord& m) {
  Json j;
  j["method"] = m.method;
  j["k"] = m.k();
  j["n"] = record_dimension(m);
  j["alpha"] = vector_to_json(m.alpha);
  Json means = Json::array();
  for (const auto& mu : m.means) means.push_back(vector_to_json(mu));
  j["means"] = means;
  Json graphs = Json::array();
  for (const auto& g : m.graphs) graphs.push_back(graph_to_edge_list(g));
  j["graphs"] = graphs;
  j["kernel"] = kernel_to_json(m.kernel);
  j["epsilon"] = m.epsilon ? Json(*m.epsilon) : Json(nullptr);
  if (!m.covariances.empty()) {
    Json covs = Json::array();
    for (const auto& c : m.covariances) covs.push_back(matrix_to_json(c));
    j["covariances"] = covs;
    j["projected"] = m.projected;
  }
  j["objective_trace"] = m.objective_trace;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  j["seed"] = m.seed.value;
  j["config"] = m.config;
  return j;
}

ModelRecord model_from_json(const Json& j, const std::filesystem::path& base_dir) {
  ModelRecord m;
  m.method = j.value("method", std::string("truth"));
  m.alpha = vector_from_json(j.at("alpha"), "alpha");
  for (const auto& mu : j.at("means")) m.means.push_back(vector_from_json(mu, "means"));
  if (static_cast<Index>(m.means.size()) != m.alpha.size())
    throw std::invalid_argument("model json: alpha and means disagree on the cluster count");
  if (j.contains("covariances")) {
    for (const auto& c : j.at("covariances")) m.covariances.push_back(matrix_from_json(c, "covariances"));
    m.projected = j.value("projected", false);
  }
  const Index n = j.contains("n") ? j.at("n").get<Index>() : record_dimension(m);
  if (j.contains("graphs")) {
    for (const auto& g : j.at("graphs")) {
      if (g.is_string()) {
        m.graphs.push_back(read_graph(base_dir / g.get<std::string>(), n));
      } else {
        m.graphs.push_back(graph_from_edge_list(g, n));
      }
    }
  }
  if (j.contains("kernel")) {
    m.kernel = kernel_from_json(j.at("kernel"));
  } else if (j.contains("tau") && !j.at("tau").is_null()) {
    m.kernel = KernelSpec::heat(j.at("tau").get<double>());
  }
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) m.epsilon = j.at("epsilon").get<double>();
  if (j.contains("objective_trace")) m.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  m.iterations = j.value("iterations", 0);
  m.converged = j.value("converged", false);
  m.seed = Seed{j.value("seed", std::uint64_t{0})};
  if (j.contains("config")) m.config = j.at("config");
  if (m.method != "gmm" && m.method != "kmeans_gl" && static_cast<Index>(m.graphs.size()) != m.k())
    throw std::invalid_argument("model json: expected one graph per cluster");
  return m;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Labels read_labels(const std::filesystem::path& path, std::optional<Index> k) {
  const Matrix m = read_csv_matrix(path);
  if (m.cols() != 1) throw std::runtime_error(path.string() + ": labels must have exactly one column");
  Labels labels;
  Index top = -1;
  for (Index r = 0; r < m.rows(); ++r) {
    const double v = m(r, 0);
    if (v < 0 || v != static_cast<double>(static_cast<Index>(v)))
      throw std::runtime_error(path.string() + ": line " + std::to_string(r + 1) + " is not a cluster index");
    labels.cluster.push_back(static_cast<Index>(v));
    top = std::max(top, static_cast<Index>(v));
  }
  labels.k = k ? *k : top + 1;
  labels.validate();
  return labels;
}

void write_labels(const std::filesystem::path& path, const Labels& labels) {
  std::ostringstream os;
  for (Index c : labels.cluster) os << c << '\n';
  write_text_file(path, os.str());
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  write_csv_matrix(dir / "signals.csv", data.signals);
  if (data.labels) write_labels(dir / "labels.csv", *data.labels);
  if (data.spec) {
    Json spec;
    spec["n"] = data.spec->dim();
    spec["k"] = data.spec->k();
    spec["alpha"] = data.spec->alpha;
    Json means = Json::array();
    for (const auto& mu : data.spec->means) means.push_back(vector_to_json(mu));
    spec["means"] = means;
    Json graphs = Json::array();
    for (Index k = 0; k < data.spec->k(); ++k) {
      const std::string name = "graph_" + std::to_string(k) + ".csv";
      write_graph_edges(dir / name, data.spec->laplacians[static_cast<std::size_t>(k)].graph());
      graphs.push_back(name);
    }
    spec["graphs"] = graphs;
    spec["kernel"] = kernel_to_json(data.spec->kernel);
    spec["tau"] = data.spec->kernel.kind() == KernelKind::Heat ? Json(data.spec->kernel.tau()) : Json(nullptr);
    write_json_file(dir / "spec.json", spec);
  }
}

DatasetFiles read_dataset(const std::filesystem::path& dir) {
  DatasetFiles out;
  out.data.signals = read_csv_matrix(dir / "signals.csv");
  const Index n = out.data.signals.cols();
  if (std::filesystem::exists(dir / "spec.json")) {
    const ModelRecord truth = model_from_json(read_json_file(dir / "spec.json"), dir);
    if (truth.n() != n) throw std::runtime_error((dir / "spec.json").string() + ": dimension differs from signals.csv");
    MixtureModelSpec spec;
    spec.alpha.assign(truth.alpha.data(), truth.alpha.data() + truth.alpha.size());
    spec.means = truth.means;
    for (const auto& g : truth.graphs) spec.laplacians.push_back(Laplacian::from_weights(g));
    spec.kernel = truth.kernel;
    out.truth_graphs = truth.graphs;
    out.data.spec = std::move(spec);
  } else {
    for (Index k = 0;; ++k) {
      const auto path = dir / ("graph_" + std::to_string(k) + ".csv");
      if (!std::filesystem::exists(path)) break;
      out.truth_graphs.push_back(read_graph(path, n));
    }
  }
  if (std::filesystem::exists(dir / "labels.csv")) {
    std::optional<Index> k;
    if (out.data.spec) k = out.data.spec->k();
    out.data.labels = read_labels(dir / "labels.csv", k);
    if (out.data.labels->size() != out.data.signals.rows())
      throw std::runtime_error((dir / "labels.csv").string() + ": label count differs from signal count");
  }
  return out;
}

}  // namespace glmm
