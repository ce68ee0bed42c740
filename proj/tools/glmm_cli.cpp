#include "glmm/commands.hpp"
#include "glmm/graph_io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace glmm;

ExperimentConfig load_config(const std::string& scenario, const std::string& config_path) {
  if (config_path.empty()) return ExperimentConfig::defaults(scenario.empty() ? "table1" : scenario);
  Json j = read_json_file(config_path);
  if (!scenario.empty()) j["scenario"] = scenario;
  return experiment_config_from_json(j);
}

struct ScenarioFlags {
  std::string scenario;
  std::string config;
  std::optional<int> repetitions;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<Index> n;
  std::optional<Index> m;
  std::string out;

  void add(CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "table1, table2, tau_sweep, noisy_labels, wishart_noise, wishart_dims, custom");
    cmd->add_option("--config", config, "Experiment config JSON");
    cmd->add_option("--repetitions", repetitions);
    cmd->add_option("--seed", seed, "Base seed");
    cmd->add_option("--threads", threads, "Worker threads (0: all cores)");
    cmd->add_option("-n,--nodes", n, "Graph size");
    cmd->add_option("-m,--signals", m, "Signal count");
    cmd->add_option("-o,--out", out, "Output directory");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = load_config(scenario, config);
    if (repetitions) c.repetitions = *repetitions;
    if (seed) c.base_seed = Seed{*seed};
    if (threads) c.threads = *threads;
    if (n) c.n = *n;
    if (m) c.m = *m;
    if (!out.empty()) c.output_dir = out;
    c.validate();
    return c;
  }
};

void print_fit_failure(const FitError& e) {
  std::cerr << "error: " << e.what() << '\n';
  for (const auto& d : e.diagnostics())
    std::cerr << "  restart " << d.restart << " (seed " << d.seed.value << "): " << (d.ok ? "ok" : d.message) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph Laplacian mixture models: data generation, fitting and experiments"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write the dataset of one scenario repetition");
  ScenarioFlags gen_flags;
  gen_flags.add(gen);
  std::size_t gen_point = 0;
  int gen_rep = 0;
  gen->add_option("--point", gen_point, "Parameter point index");
  gen->add_option("--rep", gen_rep, "Repetition index");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit one method to a dataset directory");
  std::string fit_data, fit_out, fit_method = "glmm", fit_scenario, fit_config, fit_prior_labels;
  std::optional<std::uint64_t> fit_seed;
  std::optional<Index> fit_k, fit_edges;
  std::optional<double> fit_beta1, fit_beta2, fit_heat_beta, fit_tau, fit_epsilon;
  std::optional<int> fit_restarts, fit_iterations;
  double fit_prior_conf = 1.0;
  bool fit_no_freeze = false, fit_select_labels = false, fit_no_project = false;
  fit_cmd->add_option("-d,--data", fit_data, "Dataset directory")->required();
  fit_cmd->add_option("-o,--out", fit_out, "Output directory")->required();
  fit_cmd->add_option("--method", fit_method, "glmm, ghmm, gmm or kmeans_gl");
  fit_cmd->add_option("--scenario", fit_scenario, "Start from this scenario's hyperparameters");
  fit_cmd->add_option("--config", fit_config, "JSON with hyperparameters (bare or under \"hyperparameters\")");
  fit_cmd->add_option("--seed", fit_seed);
  fit_cmd->add_option("-k,--clusters", fit_k);
  fit_cmd->add_option("--beta1", fit_beta1);
  fit_cmd->add_option("--beta2", fit_beta2);
  fit_cmd->add_option("--heat-beta", fit_heat_beta);
  fit_cmd->add_option("--tau", fit_tau, "Diffusion time of the heat model");
  fit_cmd->add_option("--epsilon", fit_epsilon);
  fit_cmd->add_option("--restarts", fit_restarts);
  fit_cmd->add_option("--max-iterations", fit_iterations);
  fit_cmd->add_option("--prior-labels", fit_prior_labels, "Labels file turned into group priors");
  fit_cmd->add_option("--prior-confidence", fit_prior_conf);
  fit_cmd->add_flag("--update-prior", fit_no_freeze, "Re-estimate group priors during EM");
  fit_cmd->add_flag("--select-by-labels", fit_select_labels, "Pick the restart with the best training-label NMSE");
  fit_cmd->add_option("--edge-count", fit_edges, "GMM: edges kept per graph");
  fit_cmd->add_flag("--no-project", fit_no_project, "GMM: fit in the full N-dimensional space");

  // predict
  auto* pred = app.add_subcommand("predict", "Cluster new signals with a stored model");
  std::string pred_model, pred_signals, pred_out;
  pred->add_option("--model", pred_model)->required()->check(CLI::ExistingFile);
  pred->add_option("--signals", pred_signals)->required()->check(CLI::ExistingFile);
  pred->add_option("-o,--out", pred_out, "Output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Score a stored model against a dataset");
  std::string ev_model, ev_data, ev_gamma, ev_labels, ev_out;
  ev->add_option("--model", ev_model)->required()->check(CLI::ExistingFile);
  ev->add_option("-d,--data", ev_data, "Dataset directory")->required();
  auto* ev_gamma_opt = ev->add_option("--responsibilities", ev_gamma, "Use these responsibilities");
  ev->add_option("--labels", ev_labels, "Use these hard labels")->excludes(ev_gamma_opt);
  ev->add_option("-o,--out", ev_out, "Write the report here instead of stdout");

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "Run a scenario protocol");
  ScenarioFlags rep_flags;
  rep_flags.add(rep);
  bool rep_select_labels = false;
  rep->add_flag("--select-by-labels", rep_select_labels, "Pick restarts by training-label NMSE");

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch", "Rank hyperparameters on a scenario");
  ScenarioFlags grid_flags;
  grid_flags.add(grid);
  GridSearchSpec grid_spec;
  std::string grid_method = "glmm";
  grid->add_option("--method", grid_method);
  grid->add_option("--objective", grid_spec.objective, "nmse or f")->check(CLI::IsMember({"nmse", "f"}));
  grid->add_option("--beta1", grid_spec.beta1)->delimiter(',');
  grid->add_option("--beta2", grid_spec.beta2)->delimiter(',');
  grid->add_option("--heat-beta", grid_spec.heat_beta)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ExperimentConfig c = gen_flags.resolve();
      const auto dir = resolve_output_dir(gen_flags.out.empty() ? c.output_dir / "data" : std::filesystem::path(gen_flags.out));
      cmd_generate(c, gen_point, gen_rep, dir);
      std::cout << "wrote " << dir.string() << " (" << parameter_point_label(c, gen_point) << ", rep " << gen_rep << ")\n";
    } else if (*fit_cmd) {
      FitOptions o;
      o.method = parse_method(fit_method);
      if (!fit_scenario.empty()) o.hp = ExperimentConfig::defaults(fit_scenario).hp;
      if (!fit_config.empty()) {
        const Json j = read_json_file(fit_config);
        o.hp = hyperparameters_from_json(j.contains("hyperparameters") ? j.at("hyperparameters") : j, o.hp);
      }
      if (fit_seed) o.seed = Seed{*fit_seed};
      if (fit_k) o.k = *fit_k;
      if (fit_beta1) o.hp.smooth.beta1 = *fit_beta1;
      if (fit_beta2) o.hp.smooth.beta2 = *fit_beta2;
      if (fit_heat_beta) o.hp.heat.beta = *fit_heat_beta;
      if (fit_tau) o.hp.ghmm_tau = *fit_tau;
      if (fit_epsilon) o.hp.epsilon = *fit_epsilon;
      if (fit_restarts) o.hp.restarts = *fit_restarts;
      if (fit_iterations) o.hp.max_iterations = *fit_iterations;
      o.hp.select_restart_by_labels = o.hp.select_restart_by_labels || fit_select_labels;
      if (!fit_prior_labels.empty()) o.prior_labels = read_labels(fit_prior_labels);
      o.prior_confidence = fit_prior_conf;
      o.freeze_prior = !fit_no_freeze;
      o.gmm_edge_count = fit_edges;
      o.gmm_project = !fit_no_project;
      const DatasetFiles data = read_dataset(fit_data);
      const FitOutput out = cmd_fit(data, o);
      const auto dir = resolve_output_dir(fit_out);
      write_fit_output(dir, out);
      if (out.report) std::cout << out.report->to_json();
    } else if (*pred) {
      const auto model_path = std::filesystem::path(pred_model);
      const ModelRecord model = model_from_json(read_json_file(model_path), model_path.parent_path());
      const Prediction p = cmd_predict(model, read_csv_matrix(pred_signals));
      write_prediction(resolve_output_dir(pred_out), p);
    } else if (*ev) {
      const auto model_path = std::filesystem::path(ev_model);
      const ModelRecord model = model_from_json(read_json_file(model_path), model_path.parent_path());
      const DatasetFiles data = read_dataset(ev_data);
      std::optional<Matrix> gamma;
      if (!ev_gamma.empty()) gamma = read_csv_matrix(ev_gamma);
      if (!ev_labels.empty()) gamma = Labels{read_labels(ev_labels, model.k()).cluster, model.k()}.one_hot();
      const MetricReport report = cmd_eval(model, data, gamma);
      if (ev_out.empty())
        std::cout << report.to_json();
      else
        write_text_file(resolve_output_dir(ev_out), report.to_json());
    } else if (*rep) {
      ExperimentConfig c = rep_flags.resolve();
      c.hp.select_restart_by_labels = c.hp.select_restart_by_labels || rep_select_labels;
      const ResultTable table = run_experiment(c);
      write_experiment(c, table);
      for (const auto& e : table.summarize())
        if (e.metric == "nmse" || e.metric == "mean_f")
          std::cout << e.method << ' ' << e.param_name << '=' << e.param_value << ' ' << e.metric << ' '
                    << format_double(e.mean) << " +- " << format_double(e.std) << " (" << e.successes << " ok, "
                    << e.failures << " failed)\n";
      std::cout << "wrote " << resolve_output_dir(c.output_dir).string() << '\n';
    } else if (*grid) {
      const ExperimentConfig c = grid_flags.resolve();
      grid_spec.method = parse_method(grid_method);
      const GridSearchResult result = grid_search(c, grid_spec);
      Json j = Json::array();
      for (const auto& p : result.ranking)
        j.push_back({{"beta1", p.beta1}, {"beta2", p.beta2}, {"heat_beta", p.heat_beta}, {"score", p.score}});
      const auto dir = resolve_output_dir(c.output_dir);
      write_json_file(dir / "gridsearch.json", j);
      std::cout << j.dump(2) << '\n';
    }
  } catch (const FitError& e) {
    print_fit_failure(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
