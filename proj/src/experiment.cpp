#include "glmm/experiment.hpp"

#include "glmm/graph_io.hpp"
#include "glmm/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace glmm {

std::string method_name(Method m) {
  switch (m) {
    case Method::Glmm: return "glmm";
    case Method::Ghmm: return "ghmm";
    case Method::Gmm: return "gmm";
    case Method::KMeansGl: return "kmeans_gl";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "glmm") return Method::Glmm;
  if (name == "ghmm") return Method::Ghmm;
  if (name == "gmm") return Method::Gmm;
  if (name == "kmeans_gl" || name == "kmeans") return Method::KMeansGl;
  throw std::invalid_argument("unknown method '" + name + "' (expected glmm, ghmm, gmm or kmeans_gl)");
}

namespace {

const std::vector<std::string> kScenarios = {"table1",        "table2",       "tau_sweep", "noisy_labels",
                                             "wishart_noise", "wishart_dims", "custom"};

bool is_wishart(const std::string& s) { return s == "wishart_noise" || s == "wishart_dims"; }

std::string join(const std::vector<double>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : std::string()) + format_double(v[i]);
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(const std::string& scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.output_dir = "results/" + scenario;
  const std::vector<std::vector<double>> table_alphas = {{0.5, 0.5}, {0.33, 0.33, 0.33}, {0.2, 0.8}};
  if (scenario == "table1") {
    c.methods = {Method::Glmm, Method::Gmm, Method::KMeansGl};
    c.alpha_settings = table_alphas;
    c.hp.smooth.beta1 = 2.0;
    c.hp.smooth.beta2 = 0.2;
    c.hp.restarts = 3;
  } else if (scenario == "table2") {
    c.methods = {Method::Glmm, Method::Gmm, Method::KMeansGl};
    c.alpha_settings = table_alphas;
    c.hp.smooth.beta1 = 1.0;
    c.hp.smooth.beta2 = 0.05;
    c.hp.restarts = 5;
  } else if (scenario == "tau_sweep") {
    c.methods = {Method::Glmm, Method::Ghmm, Method::Gmm, Method::KMeansGl};
    c.n = 20;
    c.m = 200;
    c.mean_sigma = std::sqrt(0.1);
    c.alpha_settings = {{0.5, 0.5}};
    c.tau_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    c.hp.smooth.beta1 = 1.0;
    c.hp.smooth.beta2 = 0.05;
    c.hp.heat.beta = 1.0;
    c.hp.heat.eig_floor = 1e-14;
  } else if (scenario == "noisy_labels") {
    c.methods = {Method::Glmm};
    c.alpha_settings = {{0.33, 0.33, 0.33}};
    c.noise_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    c.prior_grid = {0.33, 0.5, 0.8, 0.9, 1.0};
    c.hp.smooth.beta1 = 2.0;
    c.hp.smooth.beta2 = 0.2;
  } else if (scenario == "wishart_noise" || scenario == "wishart_dims") {
    c.methods = {Method::Glmm, Method::Gmm, Method::KMeansGl};
    c.n = 20;
    c.m = 200;
    c.k = 2;
    c.hp.smooth.beta1 = 2.0;
    c.hp.smooth.beta2 = 5.0;
    if (scenario == "wishart_noise") {
      c.sigma_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    } else {
      c.sigma_grid = {0.0};
      c.dim_grid = {15, 20, 30, 40, 50};
    }
  } else if (scenario == "custom") {
    c.methods = {Method::Glmm, Method::Gmm, Method::KMeansGl};
    c.alpha_settings = {{0.5, 0.5}};
  } else {
    throw std::invalid_argument("unknown scenario '" + scenario + "'");
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("experiment config: " + field + " " + why);
  };
  if (std::find(kScenarios.begin(), kScenarios.end(), scenario) == kScenarios.end())
    fail("scenario", "'" + scenario + "' is not recognised");
  if (repetitions < 1) fail("repetitions", "must be at least 1");
  if (methods.empty()) fail("methods", "must not be empty");
  if (n < 2) fail("n", "must be at least 2");
  if (m < 2) fail("m", "must be at least 2");
  if (!(edge_probability > 0.0 && edge_probability <= 1.0)) fail("edge_probability", "must be in (0, 1]");
  if (!(mean_sigma >= 0.0)) fail("mean_sigma", "must be nonnegative");
  if (is_wishart(scenario)) {
    if (sigma_grid.empty()) fail("sigma_grid", "must not be empty");
    if (scenario == "wishart_dims" && dim_grid.empty()) fail("dim_grid", "must not be empty");
    if (k < 1) fail("k", "must be positive");
    for (double s : sigma_grid)
      if (!(s >= 0.0)) fail("sigma_grid", "entries must be nonnegative");
    for (Index d : dim_grid)
      if (d < 2) fail("dim_grid", "entries must be at least 2");
  } else {
    if (alpha_settings.empty()) fail("alpha_settings", "must not be empty");
    for (const auto& a : alpha_settings) {
      if (a.empty()) fail("alpha_settings", "entries must not be empty");
      for (double v : a)
        if (!(v > 0.0)) fail("alpha_settings", "entries must be positive");
    }
  }
  if (scenario == "tau_sweep") {
    if (tau_grid.empty()) fail("tau_grid", "must not be empty");
    for (double t : tau_grid)
      if (!(t > 0.0)) fail("tau_grid", "entries must be positive");
  }
  if (scenario == "noisy_labels") {
    if (noise_grid.empty()) fail("noise_grid", "must not be empty");
    if (prior_grid.empty()) fail("prior_grid", "must not be empty");
    for (double v : noise_grid)
      if (!(v >= 0.0 && v <= 1.0)) fail("noise_grid", "entries must be in [0, 1]");
    for (double v : prior_grid)
      if (!(v > 0.0 && v <= 1.0)) fail("prior_grid", "entries must be in (0, 1]");
  }
  if (custom_tau < 0.0) fail("custom_tau", "must be nonnegative");
  if (hp.restarts < 1) fail("restarts", "must be at least 1");
  if (hp.max_iterations < 1) fail("max_iterations", "must be at least 1");
  if (hp.kmeans_restarts < 1) fail("kmeans_restarts", "must be at least 1");
  if (!(hp.ghmm_tau > 0.0)) fail("ghmm_tau", "must be positive");
  if (!(hp.gmm_ridge >= 0.0)) fail("gmm_ridge", "must be nonnegative");
  hp.smooth.validate();
  HeatSolverParams heat = hp.heat;
  heat.tau = hp.ghmm_tau;
  heat.validate();
}

Json to_json(const Hyperparameters& h) {
  return {
      {"beta1", h.smooth.beta1},
      {"beta2", h.smooth.beta2},
      {"smooth_max_iterations", h.smooth.max_iterations},
      {"smooth_tol", h.smooth.tol},
      {"heat_beta", h.heat.beta},
      {"heat_max_iterations", h.heat.max_iterations},
      {"heat_tol", h.heat.tol},
      {"eig_floor", h.heat.eig_floor},
      {"ghmm_tau", h.ghmm_tau},
      {"epsilon", h.epsilon ? Json(*h.epsilon) : Json(nullptr)},
      {"restarts", h.restarts},
      {"max_iterations", h.max_iterations},
      {"convergence_tol", h.convergence_tol},
      {"scale_priors_by_mass", h.scale_priors_by_mass},
      {"gmm_ridge", h.gmm_ridge},
      {"kmeans_restarts", h.kmeans_restarts},
      {"select_restart_by_labels", h.select_restart_by_labels},
  };
}

Hyperparameters hyperparameters_from_json(const Json& h, Hyperparameters base) {
  static const std::vector<std::string> known = {
      "beta1",     "beta2",         "smooth_max_iterations", "smooth_tol",       "heat_beta",
      "heat_max_iterations", "heat_tol", "eig_floor",        "ghmm_tau",         "epsilon",
      "restarts",  "max_iterations", "convergence_tol",      "scale_priors_by_mass", "gmm_ridge",
      "kmeans_restarts", "select_restart_by_labels"};
  for (const auto& [key, value] : h.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("hyperparameters: unknown field '" + key + "'");
  try {
    base.smooth.beta1 = h.value("beta1", base.smooth.beta1);
    base.smooth.beta2 = h.value("beta2", base.smooth.beta2);
    base.smooth.max_iterations = h.value("smooth_max_iterations", base.smooth.max_iterations);
    base.smooth.tol = h.value("smooth_tol", base.smooth.tol);
    base.heat.beta = h.value("heat_beta", base.heat.beta);
    base.heat.max_iterations = h.value("heat_max_iterations", base.heat.max_iterations);
    base.heat.tol = h.value("heat_tol", base.heat.tol);
    base.heat.eig_floor = h.value("eig_floor", base.heat.eig_floor);
    base.ghmm_tau = h.value("ghmm_tau", base.ghmm_tau);
    if (h.contains("epsilon"))
      base.epsilon = h.at("epsilon").is_null() ? std::nullopt : std::optional<double>(h.at("epsilon").get<double>());
    base.restarts = h.value("restarts", base.restarts);
    base.max_iterations = h.value("max_iterations", base.max_iterations);
    base.convergence_tol = h.value("convergence_tol", base.convergence_tol);
    base.scale_priors_by_mass = h.value("scale_priors_by_mass", base.scale_priors_by_mass);
    base.gmm_ridge = h.value("gmm_ridge", base.gmm_ridge);
    base.kmeans_restarts = h.value("kmeans_restarts", base.kmeans_restarts);
    base.select_restart_by_labels = h.value("select_restart_by_labels", base.select_restart_by_labels);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("hyperparameters: ") + e.what());
  }
  return base;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["repetitions"] = c.repetitions;
  j["base_seed"] = c.base_seed.value;
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  j["n"] = c.n;
  j["m"] = c.m;
  j["k"] = c.k;
  j["edge_probability"] = c.edge_probability;
  j["mean_sigma"] = c.mean_sigma;
  j["alpha_settings"] = c.alpha_settings;
  j["tau_grid"] = c.tau_grid;
  j["noise_grid"] = c.noise_grid;
  j["prior_grid"] = c.prior_grid;
  j["sigma_grid"] = c.sigma_grid;
  j["dim_grid"] = c.dim_grid;
  j["custom_tau"] = c.custom_tau;
  j["output_dir"] = c.output_dir.string();
  j["threads"] = c.threads;
  j["hyperparameters"] = to_json(c.hp);
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c = ExperimentConfig::defaults(j.value("scenario", std::string("table1")));
  static const std::vector<std::string> known = {
      "scenario",   "repetitions", "base_seed",  "methods",    "n",          "m",         "k",
      "edge_probability", "mean_sigma", "alpha_settings", "tau_grid", "noise_grid", "prior_grid", "sigma_grid",
      "dim_grid",   "custom_tau",  "output_dir", "threads",    "hyperparameters"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("experiment config: unknown field '" + key + "'");
  try {
    if (j.contains("repetitions")) c.repetitions = j.at("repetitions").get<int>();
    if (j.contains("base_seed")) c.base_seed = Seed{j.at("base_seed").get<std::uint64_t>()};
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("n")) c.n = j.at("n").get<Index>();
    if (j.contains("m")) c.m = j.at("m").get<Index>();
    if (j.contains("k")) c.k = j.at("k").get<Index>();
    if (j.contains("edge_probability")) c.edge_probability = j.at("edge_probability").get<double>();
    if (j.contains("mean_sigma")) c.mean_sigma = j.at("mean_sigma").get<double>();
    if (j.contains("alpha_settings")) c.alpha_settings = j.at("alpha_settings").get<std::vector<std::vector<double>>>();
    if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    if (j.contains("noise_grid")) c.noise_grid = j.at("noise_grid").get<std::vector<double>>();
    if (j.contains("prior_grid")) c.prior_grid = j.at("prior_grid").get<std::vector<double>>();
    if (j.contains("sigma_grid")) c.sigma_grid = j.at("sigma_grid").get<std::vector<double>>();
    if (j.contains("dim_grid")) c.dim_grid = j.at("dim_grid").get<std::vector<Index>>();
    if (j.contains("custom_tau")) c.custom_tau = j.at("custom_tau").get<double>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("hyperparameters")) c.hp = hyperparameters_from_json(j.at("hyperparameters"), c.hp);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("experiment config: ") + e.what());
  }
  return c;
}

void ResultTable::merge(ResultTable other) {
  rows_.insert(rows_.end(), std::make_move_iterator(other.rows_.begin()), std::make_move_iterator(other.rows_.end()));
  failures_.insert(failures_.end(), std::make_move_iterator(other.failures_.begin()),
                   std::make_move_iterator(other.failures_.end()));
}

void ResultTable::normalize() {
  auto key = [](const ResultRow& r) {
    return std::tie(r.scenario, r.method, r.param_name, r.param_value, r.rep, r.metric);
  };
  std::stable_sort(rows_.begin(), rows_.end(), [&](const ResultRow& a, const ResultRow& b) { return key(a) < key(b); });
  std::stable_sort(failures_.begin(), failures_.end(), [](const FailureRecord& a, const FailureRecord& b) {
    return std::tie(a.method, a.param_name, a.param_value, a.rep) < std::tie(b.method, b.param_name, b.param_value, b.rep);
  });
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  os << "scenario,method,param_name,param_value,rep,metric,value,seed\n";
  for (const auto& r : rows_)
    os << r.scenario << ',' << r.method << ',' << r.param_name << ',' << r.param_value << ',' << r.rep << ','
       << r.metric << ',' << format_double(r.value) << ',' << r.seed.value << '\n';
  return os.str();
}

std::vector<SummaryEntry> ResultTable::summarize() const {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows_) groups[{r.method, r.param_name, r.param_value, r.metric}].push_back(r.value);
  std::vector<SummaryEntry> out;
  for (const auto& [key, values] : groups) {
    SummaryEntry e;
    std::tie(e.method, e.param_name, e.param_value, e.metric) = key;
    e.successes = static_cast<int>(values.size());
    e.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    e.failures = static_cast<int>(std::count_if(failures_.begin(), failures_.end(), [&](const FailureRecord& f) {
      return f.method == e.method && f.param_name == e.param_name && f.param_value == e.param_value;
    }));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<double> ResultTable::values(const std::string& method, const std::string& param_value,
                                        const std::string& metric) const {
  std::vector<std::pair<int, double>> found;
  for (const auto& r : rows_)
    if (r.method == method && r.param_value == param_value && r.metric == metric) found.emplace_back(r.rep, r.value);
  std::sort(found.begin(), found.end());
  std::vector<double> out;
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

double ResultTable::mean(const std::string& method, const std::string& param_value, const std::string& metric) const {
  const auto v = values(method, param_value, metric);
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Json summary_to_json(const ExperimentConfig& config, const ResultTable& table) {
  Json j;
  j["scenario"] = config.scenario;
  j["repetitions"] = config.repetitions;
  j["base_seed"] = config.base_seed.value;
  Json entries = Json::array();
  for (const auto& e : table.summarize()) {
    entries.push_back({{"method", e.method},
                       {"param_name", e.param_name},
                       {"param_value", e.param_value},
                       {"metric", e.metric},
                       {"mean", e.mean},
                       {"std", e.std},
                       {"successes", e.successes},
                       {"failures", e.failures}});
  }
  j["summary"] = entries;
  Json failures = Json::array();
  for (const auto& f : table.failures())
    failures.push_back({{"method", f.method},
                        {"param_name", f.param_name},
                        {"param_value", f.param_value},
                        {"rep", f.rep},
                        {"seed", f.seed.value},
                        {"reason", f.reason}});
  j["failures"] = failures;
  return j;
}

namespace {

struct ParamPoint {
  std::string name;
  std::string value;
  std::vector<double> alpha;
  KernelSpec kernel = KernelSpec::smooth();
  double noise = 0.0;
  double prior = 1.0;
  double sigma = 0.0;
  Index n = 0;
};

std::vector<ParamPoint> parameter_points(const ExperimentConfig& c) {
  std::vector<ParamPoint> out;
  if (c.scenario == "table1" || c.scenario == "table2" || c.scenario == "custom") {
    for (const auto& a : c.alpha_settings) {
      ParamPoint p;
      p.name = "alpha";
      p.value = join(a, ';');
      p.alpha = a;
      p.n = c.n;
      if (c.scenario == "custom" && c.custom_tau > 0.0) p.kernel = KernelSpec::heat(c.custom_tau);
      out.push_back(p);
    }
  } else if (c.scenario == "tau_sweep") {
    for (double t : c.tau_grid) {
      ParamPoint p;
      p.name = "tau";
      p.value = format_double(t);
      p.alpha = c.alpha_settings.front();
      p.kernel = KernelSpec::heat(t);
      p.n = c.n;
      out.push_back(p);
    }
  } else if (c.scenario == "noisy_labels") {
    for (double noise : c.noise_grid)
      for (double prior : c.prior_grid) {
        ParamPoint p;
        p.name = "noise/prior";
        p.value = format_double(noise) + "/" + format_double(prior);
        p.alpha = c.alpha_settings.front();
        p.noise = noise;
        p.prior = prior;
        p.n = c.n;
        out.push_back(p);
      }
  } else if (c.scenario == "wishart_noise") {
    for (double s : c.sigma_grid) {
      ParamPoint p;
      p.name = "sigma";
      p.value = format_double(s);
      p.sigma = s;
      p.n = c.n;
      out.push_back(p);
    }
  } else if (c.scenario == "wishart_dims") {
    for (Index d : c.dim_grid) {
      ParamPoint p;
      p.name = "n";
      p.value = std::to_string(d);
      p.sigma = c.sigma_grid.front();
      p.n = d;
      out.push_back(p);
    }
  }
  return out;
}

ScenarioInstance make_instance(const ExperimentConfig& c, const ParamPoint& p, Seed rep_seed, Seed point_seed) {
  ScenarioInstance inst;
  if (is_wishart(c.scenario)) {
    const auto spec = generate_wishart_gmm(p.n, c.k, split_seed(point_seed, 1));
    inst.data = sample_gaussian_mixture(spec, c.m, split_seed(point_seed, 2));
    if (p.sigma > 0.0) inst.data = add_white_noise(inst.data, p.sigma, split_seed(point_seed, 3));
    return inst;
  }
  const auto k = static_cast<Index>(p.alpha.size());
  MixtureModelSpec spec;
  const double total = std::accumulate(p.alpha.begin(), p.alpha.end(), 0.0);
  for (double a : p.alpha) spec.alpha.push_back(a / total);
  // Graphs and means depend on the repetition only, so every parameter
  // point of a sweep shares them.
  spec.means = generate_random_means(k, p.n, c.mean_sigma, split_seed(rep_seed, 5));
  for (Index i = 0; i < k; ++i) {
    Graph g = generate_er_connected(p.n, c.edge_probability, split_seed(rep_seed, 10 + static_cast<std::uint64_t>(i)));
    spec.laplacians.push_back(Laplacian::from_weights(g));
    inst.truth.push_back(std::move(g));
  }
  spec.kernel = p.kernel;
  inst.data = sample_mixture(spec, c.m, split_seed(point_seed, 2));
  return inst;
}

FitConfig fit_config_for(const ExperimentConfig& c, Index k, const KernelSpec& kernel) {
  FitConfig f;
  f.k = k;
  f.kernel = kernel;
  f.epsilon = c.hp.epsilon;
  f.max_iterations = c.hp.max_iterations;
  f.convergence_tol = c.hp.convergence_tol;
  f.restarts = c.hp.restarts;
  f.smooth = c.hp.smooth;
  f.heat = c.hp.heat;
  f.scale_priors_by_mass = c.hp.scale_priors_by_mass;
  return f;
}

void add_graph_metrics(ResultTable& t, const ResultRow& base, const MetricReport& report) {
  if (report.per_graph_f.empty()) return;
  ResultRow r = base;
  r.metric = "mean_f";
  r.value = report.mean_f();
  t.append(r);
  for (std::size_t j = 0; j < report.per_graph_f.size(); ++j) {
    r.metric = "f_" + std::to_string(j);
    r.value = report.per_graph_f[j];
    t.append(r);
  }
}

void run_method(const ExperimentConfig& c, const ParamPoint& p, const ScenarioInstance& inst, Method method, int rep,
                Seed rep_seed, Seed method_seed, ResultTable& out) {
  const Dataset& data = inst.data;
  const Index k = data.labels->k;
  const Matrix z = data.labels->one_hot();
  ResultRow base;
  base.scenario = c.scenario;
  base.method = method_name(method);
  base.param_name = p.name;
  base.param_value = p.value;
  base.rep = rep;
  base.seed = rep_seed;
  auto emit = [&](const std::string& metric, double value) {
    ResultRow r = base;
    r.metric = metric;
    r.value = value;
    out.append(r);
  };

  switch (method) {
    case Method::Glmm:
    case Method::Ghmm: {
      const KernelSpec kernel = method == Method::Ghmm ? KernelSpec::heat(c.hp.ghmm_tau) : KernelSpec::smooth();
      FitConfig f = fit_config_for(c, k, kernel);
      std::optional<GroupPrior> prior;
      if (c.scenario == "noisy_labels") {
        const Labels noisy = corrupt_labels(*data.labels, p.noise, split_seed(method_seed, 1));
        prior = GroupPrior::from_labels(noisy, p.prior, p.prior >= 1.0);
        f.restarts = 1;
      }
      RestartScore score;
      if (c.hp.select_restart_by_labels)
        score = [&z](const FittedModel& m) { return -clustering_nmse(m.gamma.gamma, z); };
      const FittedModel model = fit(data, f, method_seed, prior, score);
      const MetricReport report = evaluate(model.gamma.gamma, inst.truth.empty() ? std::vector<Graph>{} : model.graphs,
                                           data.labels, inst.truth);
      emit("nmse", *report.clustering_nmse_percent);
      add_graph_metrics(out, base, report);
      emit("objective", model.final_objective());
      emit("iterations", model.iterations_used);
      emit("converged", model.converged ? 1.0 : 0.0);
      break;
    }
    case Method::Gmm: {
      GmmConfig g;
      g.k = k;
      g.covariance_ridge = c.hp.gmm_ridge;
      g.project_constant_out = !is_wishart(c.scenario);
      g.restarts = c.hp.restarts;
      const GmmModel model = fit_gmm(data, g, method_seed);
      const ClusterAlignment align = align_clusters(model.gamma.gamma, z);
      emit("nmse", clustering_nmse(model.gamma.gamma, z, align));
      if (!inst.truth.empty()) {
        // The estimated cluster matched to true cluster j keeps as many
        // edges as that true graph has.
        MetricReport report;
        for (Index j = 0; j < k; ++j) {
          const Graph& truth = inst.truth[static_cast<std::size_t>(j)];
          const Graph learned = top_edges_from_precision(model.precision(align.estimated_for(j)), truth.edge_count());
          report.per_graph_f.push_back(edge_f_measure(learned, truth));
        }
        add_graph_metrics(out, base, report);
      }
      emit("iterations", model.iterations_used);
      break;
    }
    case Method::KMeansGl: {
      KMeansConfig kc;
      kc.k = k;
      kc.restarts = c.hp.kmeans_restarts;
      KMeansGraphResult result;
      if (inst.truth.empty()) {
        result.clustering = fit_kmeans(data, kc, method_seed);
      } else {
        result = kmeans_plus_graph_learning(data, kc, c.hp.smooth, method_seed, c.hp.scale_priors_by_mass);
      }
      const Matrix gamma = result.clustering.labels.one_hot();
      std::vector<Graph> graphs;
      for (const auto& g : result.graphs) graphs.push_back(g ? g->graph : Graph::empty(data.n()));
      const MetricReport report = evaluate(gamma, graphs, data.labels, inst.truth);
      emit("nmse", *report.clustering_nmse_percent);
      add_graph_metrics(out, base, report);
      emit("cost", result.clustering.cost);
      break;
    }
  }
}

Seed rep_seed_for(const ExperimentConfig& c, int rep) { return split_seed(c.base_seed, static_cast<std::uint64_t>(rep)); }

Seed point_seed_for(Seed rep_seed, std::size_t point) { return split_seed(rep_seed, 1000 + point); }

}  // namespace

std::size_t parameter_point_count(const ExperimentConfig& config) { return parameter_points(config).size(); }

std::string parameter_point_label(const ExperimentConfig& config, std::size_t point) {
  const auto points = parameter_points(config);
  if (point >= points.size()) throw std::out_of_range("parameter point " + std::to_string(point) + " out of range");
  return points[point].name + "=" + points[point].value;
}

ScenarioInstance scenario_instance(const ExperimentConfig& config, std::size_t point, int rep) {
  config.validate();
  const auto points = parameter_points(config);
  if (point >= points.size()) throw std::out_of_range("parameter point " + std::to_string(point) + " out of range");
  if (rep < 0) throw std::out_of_range("repetition must be nonnegative");
  const Seed rep_seed = rep_seed_for(config, rep);
  return make_instance(config, points[point], rep_seed, point_seed_for(rep_seed, point));
}

ResultTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::vector<ParamPoint> points = parameter_points(config);
  struct Task {
    std::size_t point;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (int r = 0; r < config.repetitions; ++r) tasks.push_back({p, r});

  std::vector<ResultTable> results(tasks.size());
  auto run_task = [&](std::size_t t) {
    const auto& [pi, rep] = tasks[t];
    const ParamPoint& point = points[pi];
    const Seed rep_seed = rep_seed_for(config, rep);
    const Seed point_seed = point_seed_for(rep_seed, pi);
    ResultTable& out = results[t];
    std::optional<ScenarioInstance> inst;
    try {
      inst = make_instance(config, point, rep_seed, point_seed);
    } catch (const std::exception& e) {
      for (Method m : config.methods)
        out.append_failure({method_name(m), point.name, point.value, rep, rep_seed, std::string("data generation: ") + e.what()});
      return;
    }
    for (Method m : config.methods) {
      const Seed method_seed = split_seed(point_seed, 100 + static_cast<std::uint64_t>(m));
      ResultTable local;
      try {
        run_method(config, point, *inst, m, rep, rep_seed, method_seed, local);
        out.merge(std::move(local));
      } catch (const std::exception& e) {
        out.append_failure({method_name(m), point.name, point.value, rep, rep_seed, e.what()});
      }
    }
  };

  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, tasks.size()));
  if (threads <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) run_task(t);
      });
    for (auto& th : pool) th.join();
  }

  ResultTable table;
  for (auto& r : results) table.merge(std::move(r));
  table.normalize();
  return table;
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("GLMM_OUTPUT_ROOT"); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / dir;
  return dir;
}

void write_experiment(const ExperimentConfig& config, const ResultTable& table) {
  const auto dir = resolve_output_dir(config.output_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "results.csv", table.to_csv());
  write_json_file(dir / "summary.json", summary_to_json(config, table));
  write_json_file(dir / "config.json", to_json(config));
}

GridSearchResult grid_search(const ExperimentConfig& base, const GridSearchSpec& grid) {
  if (grid.objective != "nmse" && grid.objective != "f")
    throw std::invalid_argument("grid search: objective must be nmse or f");
  const bool heat = grid.method == Method::Ghmm;
  const std::vector<double> heat_betas = heat ? grid.heat_beta : std::vector<double>{base.hp.heat.beta};
  const std::vector<double> beta1s = heat ? std::vector<double>{base.hp.smooth.beta1} : grid.beta1;
  const std::vector<double> beta2s = heat ? std::vector<double>{base.hp.smooth.beta2} : grid.beta2;
  GridSearchResult out;
  for (double b1 : beta1s)
    for (double b2 : beta2s)
      for (double hb : heat_betas) {
        ExperimentConfig c = base;
        c.methods = {grid.method};
        c.hp.smooth.beta1 = b1;
        c.hp.smooth.beta2 = b2;
        c.hp.heat.beta = hb;
        const ResultTable table = run_experiment(c);
        const std::string metric = grid.objective == "nmse" ? "nmse" : "mean_f";
        double total = 0.0;
        int count = 0;
        for (const auto& row : table.rows())
          if (row.metric == metric) {
            total += row.value;
            ++count;
          }
        // Failed repetitions count as the worst possible value.
        const int failed = static_cast<int>(table.failures().size());
        total += failed * (grid.objective == "nmse" ? 100.0 : 0.0);
        count += failed;
        GridPoint gp{b1, b2, hb, count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN()};
        out.points.push_back(gp);
      }
  out.ranking = out.points;
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](const GridPoint& a, const GridPoint& b) {
    return grid.objective == "nmse" ? a.score < b.score : a.score > b.score;
  });
  return out;
}

}  // namespace glmm
