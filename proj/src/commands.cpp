#include "glmm/commands.hpp"

#include "glmm/graph_io.hpp"

#include <stdexcept>

namespace glmm {

DatasetFiles cmd_generate(const ExperimentConfig& config, std::size_t point, int rep,
                          const std::filesystem::path& out_dir) {
  ScenarioInstance inst = scenario_instance(config, point, rep);
  write_dataset(out_dir, inst.data);
  return {std::move(inst.data), std::move(inst.truth)};
}

namespace {

Index resolve_k(const DatasetFiles& data, Index k) {
  if (k > 0) return k;
  if (data.data.labels) return data.data.labels->k;
  if (!data.truth_graphs.empty()) return static_cast<Index>(data.truth_graphs.size());
  throw std::invalid_argument("fit: cluster count not given and the dataset has no labels or truth graphs");
}

Json diagnostics_to_json(const std::vector<RestartDiagnostic>& diags) {
  Json out = Json::array();
  for (const auto& d : diags)
    out.push_back({{"restart", d.restart},
                   {"seed", d.seed.value},
                   {"ok", d.ok},
                   {"message", d.message},
                   {"final_objective", d.final_objective},
                   {"iterations", d.iterations}});
  return out;
}

std::optional<MetricReport> report_for(const Matrix& gamma, const std::vector<Graph>& graphs, const DatasetFiles& data) {
  if (!data.data.labels && data.truth_graphs.empty()) return std::nullopt;
  return evaluate(gamma, data.truth_graphs.empty() ? std::vector<Graph>{} : graphs, data.data.labels,
                  data.truth_graphs);
}

}  // namespace

FitOutput cmd_fit(const DatasetFiles& data, const FitOptions& options) {
  const Index k = resolve_k(data, options.k);
  const Hyperparameters& hp = options.hp;
  Json config = {{"method", method_name(options.method)},
                 {"k", k},
                 {"seed", options.seed.value},
                 {"hyperparameters", to_json(hp)}};
  FitOutput out;

  switch (options.method) {
    case Method::Glmm:
    case Method::Ghmm: {
      FitConfig f;
      f.k = k;
      f.kernel = options.method == Method::Ghmm ? KernelSpec::heat(hp.ghmm_tau) : KernelSpec::smooth();
      f.epsilon = hp.epsilon;
      f.max_iterations = hp.max_iterations;
      f.convergence_tol = hp.convergence_tol;
      f.restarts = hp.restarts;
      f.smooth = hp.smooth;
      f.heat = hp.heat;
      f.scale_priors_by_mass = hp.scale_priors_by_mass;
      std::optional<GroupPrior> prior;
      if (options.prior_labels) {
        if (options.prior_labels->size() != data.data.m())
          throw std::invalid_argument("fit: prior label count differs from signal count");
        prior = GroupPrior::from_labels(Labels{options.prior_labels->cluster, k}, options.prior_confidence,
                                        options.freeze_prior);
        config["prior_confidence"] = options.prior_confidence;
        config["freeze_prior"] = options.freeze_prior;
      }
      RestartScore score;
      if (hp.select_restart_by_labels) {
        if (!data.data.labels) throw std::invalid_argument("fit: restart selection by labels needs labels.csv");
        const Matrix z = Labels{data.data.labels->cluster, k}.one_hot();
        score = [z](const FittedModel& m) { return -clustering_nmse(m.gamma.gamma, z); };
      }
      const FittedModel model = fit(data.data, f, options.seed, prior, score);
      out.model = record_from_fit(model, method_name(options.method), config);
      out.gamma = model.gamma.gamma;
      out.trace = {{"objective_trace", model.objective_trace},
                   {"iterations", model.iterations_used},
                   {"converged", model.converged},
                   {"solver_warnings", model.solver_warnings},
                   {"selected_restart", model.selected_restart},
                   {"restarts", diagnostics_to_json(model.restarts)}};
      break;
    }
    case Method::Gmm: {
      GmmConfig g;
      g.k = k;
      g.covariance_ridge = hp.gmm_ridge;
      g.project_constant_out = options.gmm_project;
      g.restarts = hp.restarts;
      const GmmModel model = fit_gmm(data.data, g, options.seed);
      out.model = record_from_gmm(model, config, options.gmm_edge_count);
      out.gamma = model.gamma.gamma;
      if (!options.gmm_edge_count && !data.truth_graphs.empty()) {
        if (static_cast<Index>(data.truth_graphs.size()) != k)
          throw std::invalid_argument("fit: truth graph count differs from the cluster count");
        // Estimated cluster e keeps as many edges as the truth graph it is
        // matched with; without labels the truth graphs are taken in order.
        const ClusterAlignment align = data.data.labels
                                           ? align_clusters(out.gamma, Labels{data.data.labels->cluster, k}.one_hot())
                                           : ClusterAlignment::identity(k);
        out.model.graphs.assign(static_cast<std::size_t>(k), Graph::empty(data.data.n()));
        for (Index j = 0; j < k; ++j) {
          const Index e = align.estimated_for(j);
          out.model.graphs[static_cast<std::size_t>(e)] =
              top_edges_from_precision(model.precision(e), data.truth_graphs[static_cast<std::size_t>(j)].edge_count());
        }
      }
      out.trace = {{"objective_trace", model.log_likelihood_trace}, {"iterations", model.iterations_used}};
      break;
    }
    case Method::KMeansGl: {
      KMeansConfig kc;
      kc.k = k;
      kc.restarts = hp.kmeans_restarts;
      const KMeansGraphResult result =
          kmeans_plus_graph_learning(data.data, kc, hp.smooth, options.seed, hp.scale_priors_by_mass);
      out.model = record_from_kmeans(result, data.data.n(), options.seed, config);
      out.gamma = result.clustering.labels.one_hot();
      Json solver = Json::array();
      for (const auto& g : result.graphs)
        solver.push_back(g ? Json{{"iterations", g->iterations}, {"converged", g->converged}} : Json(nullptr));
      out.trace = {{"cost_trace", result.clustering.cost_trace}, {"cost", result.clustering.cost}, {"graph_solves", solver}};
      break;
    }
  }
  out.report = report_for(out.gamma, out.model.graphs, data);
  return out;
}

void write_fit_output(const std::filesystem::path& out_dir, const FitOutput& out) {
  std::filesystem::create_directories(out_dir);
  write_json_file(out_dir / "model.json", to_json(out.model));
  write_csv_matrix(out_dir / "responsibilities.csv", out.gamma);
  write_labels(out_dir / "labels.csv", Labels::from_argmax(out.gamma));
  write_json_file(out_dir / "trace.json", out.trace);
  if (out.report) write_text_file(out_dir / "metrics.json", out.report->to_json());
}

MetricReport cmd_eval(const ModelRecord& model, const DatasetFiles& data, const std::optional<Matrix>& gamma) {
  Matrix g = gamma ? *gamma : predict_record(model, data.data.signals);
  if (g.rows() != data.data.m())
    throw std::invalid_argument("eval: responsibilities have " + std::to_string(g.rows()) + " rows, dataset has " +
                                std::to_string(data.data.m()) + " signals");
  if (g.cols() != model.k())
    throw std::invalid_argument("eval: responsibilities have " + std::to_string(g.cols()) + " columns, model has " +
                                std::to_string(model.k()) + " clusters");
  if (!model.graphs.empty() && !data.truth_graphs.empty() && model.graphs.front().size() != data.truth_graphs.front().size())
    throw std::invalid_argument("eval: model graphs and truth graphs differ in size");
  const auto report = report_for(g, model.graphs, data);
  if (!report) throw std::invalid_argument("eval: dataset has neither labels nor truth graphs");
  return *report;
}

Prediction cmd_predict(const ModelRecord& model, const Matrix& signals) {
  Prediction p;
  p.gamma = predict_record(model, signals);
  p.labels = Labels::from_argmax(p.gamma);
  return p;
}

void write_prediction(const std::filesystem::path& out_dir, const Prediction& p) {
  std::filesystem::create_directories(out_dir);
  write_csv_matrix(out_dir / "responsibilities.csv", p.gamma);
  write_labels(out_dir / "labels.csv", p.labels);
}

}  // namespace glmm
