#include "glmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace glmm {

void FitConfig::validate() const {
  if (k < 1) throw std::invalid_argument("fit config: k must be positive");
  if (epsilon && !(*epsilon > 0.0)) throw std::invalid_argument("fit config: epsilon must be positive");
  if (max_iterations < 0) throw std::invalid_argument("fit config: max_iterations must be nonnegative");
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("fit config: convergence_tol must be positive");
  if (restarts < 1) throw std::invalid_argument("fit config: restarts must be at least 1");
  if (min_cluster_mass < 0.0) throw std::invalid_argument("fit config: min_cluster_mass must be nonnegative");
  smooth.validate();
  HeatSolverParams h = heat;
  if (kernel.kind() == KernelKind::Heat) h.tau = kernel.tau();
  h.validate();
}

bool Responsibilities::is_row_stochastic(double tol) const {
  if (!gamma.allFinite()) return false;
  if ((gamma.array() < 0.0).any() || (gamma.array() > 1.0).any()) return false;
  for (Index m = 0; m < gamma.rows(); ++m)
    if (std::abs(gamma.row(m).sum() - 1.0) > tol) return false;
  return true;
}

void GroupPrior::validate(Index m, Index k) const {
  if (static_cast<Index>(group_of.size()) != m) throw std::invalid_argument("group prior: group_of length must equal M");
  if (prior.cols() != k) throw std::invalid_argument("group prior: prior must have K columns");
  for (Index g : group_of)
    if (g < 0 || g >= prior.rows()) throw std::invalid_argument("group prior: group index out of range");
  for (Index g = 0; g < prior.rows(); ++g) {
    if ((prior.row(g).array() < 0.0).any()) throw std::invalid_argument("group prior: negative entry");
    if (std::abs(prior.row(g).sum() - 1.0) > 1e-9) throw std::invalid_argument("group prior: rows must sum to 1");
  }
}

GroupPrior GroupPrior::from_labels(const Labels& labels, double confidence, bool frozen) {
  labels.validate();
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw std::invalid_argument("group prior: confidence must be in [0, 1]");
  GroupPrior out;
  out.group_of = labels.cluster;
  out.frozen = frozen;
  const Index k = labels.k;
  const double rest = k > 1 ? (1.0 - confidence) / static_cast<double>(k - 1) : 0.0;
  out.prior = Matrix::Constant(k, k, rest);
  out.prior.diagonal().setConstant(k > 1 ? confidence : 1.0);
  return out;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_signals(const Matrix& signals, Index n) {
  if (signals.cols() != n) {
    std::ostringstream os;
    os << "signal dimension " << signals.cols() << " does not match model dimension " << n;
    throw std::invalid_argument(os.str());
  }
  if (!signals.allFinite()) throw std::invalid_argument("signals contain non-finite values");
}

/// Gaussian restricted to span(basis) with diagonal precision in that basis.
struct ClusterDensity {
  Matrix basis;
  Vector precision;
  double log_normalizer = 0.0;
};

double default_epsilon(const Vector& eigenvalues) {
  const double cutoff = kRankTolerance * std::max(0.0, eigenvalues.maxCoeff());
  double sum = 0.0;
  int count = 0;
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) > cutoff && eigenvalues(i) > 0.0) {
      sum += eigenvalues(i);
      ++count;
    }
  }
  return count ? 1e-6 * sum / count : 1e-6;
}

ClusterDensity make_density(const Laplacian& l, const KernelSpec& kernel, std::optional<double> epsilon) {
  const SpectralDecomposition eig = spectral_decompose(l);
  const Index n = l.size();
  ClusterDensity out;
  if (kernel.kind() == KernelKind::Heat) {
    out.basis = eig.eigenvectors;
    out.precision = (2.0 * kernel.tau() * eig.eigenvalues).array().exp();
  } else {
    const double eps = epsilon ? *epsilon : default_epsilon(eig.eigenvalues);
    out.basis = eig.eigenvectors.rightCols(n - 1);
    out.precision = eig.eigenvalues.tail(n - 1).cwiseMax(0.0).array() + eps;
  }
  const auto d = static_cast<double>(out.precision.size());
  out.log_normalizer = -0.5 * d * kLog2Pi + 0.5 * out.precision.array().log().sum();
  return out;
}

/// log pi_{m,k}: global alpha or the per-signal group prior.
Matrix log_mixing(const ModelState& state, Index m, const GroupPrior* prior) {
  Matrix out(m, state.k());
  for (Index row = 0; row < m; ++row) {
    const Vector weights = prior ? Vector(prior->prior.row(prior->group_of[static_cast<std::size_t>(row)]).transpose())
                                 : state.alpha;
    for (Index k = 0; k < state.k(); ++k)
      out(row, k) = weights(k) > 0.0 ? std::log(weights(k)) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

struct Posterior {
  Responsibilities gamma;
  double log_likelihood = 0.0;
};

Posterior posterior(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                    std::optional<double> epsilon, const GroupPrior* prior) {
  if (prior) prior->validate(signals.rows(), state.k());
  Matrix log_w = log_densities(state, signals, kernel, epsilon) + log_mixing(state, signals.rows(), prior);
  Posterior out;
  out.gamma.gamma.resize(log_w.rows(), log_w.cols());
  for (Index m = 0; m < log_w.rows(); ++m) {
    const double top = log_w.row(m).maxCoeff();
    if (!std::isfinite(top)) {
      std::ostringstream os;
      os << "signal " << m << " has zero probability under every cluster";
      throw NumericalError(os.str());
    }
    double total = 0.0;
    for (Index k = 0; k < log_w.cols(); ++k) {
      const double v = std::exp(log_w(m, k) - top);
      out.gamma.gamma(m, k) = v;
      total += v;
    }
    out.gamma.gamma.row(m) /= total;
    out.log_likelihood += top + std::log(total);
  }
  return out;
}

Laplacian random_laplacian(Index n, const std::optional<EdgeMask>& mask, Seed seed) {
  Graph g = generate_er_weighted(n, 0.7, 0.1, 2.0, seed);
  if (mask) {
    Matrix w = g.weights();
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (!mask->allowed(i, j)) w(i, j) = 0.0;
    g = Graph(std::move(w));
  }
  return Laplacian::from_weights(g);
}

}  // namespace

ModelState initialize(const Dataset& data, const FitConfig& config, Seed seed) {
  config.validate();
  const Index m = data.m();
  const Index n = data.n();
  if (m < config.k) throw std::invalid_argument("initialize: fewer signals than clusters");
  if (n < 2) throw std::invalid_argument("initialize: signals must have at least 2 entries");
  Rng rng(seed);
  ModelState state;
  state.alpha = Vector::Constant(config.k, 1.0 / static_cast<double>(config.k));
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index k = 0; k < config.k; ++k) {
    const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m - k)));
    std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(j)]);
    state.means.push_back(data.signals.row(order[static_cast<std::size_t>(k)]).transpose());
  }
  for (Index k = 0; k < config.k; ++k) {
    state.laplacians.push_back(random_laplacian(n, config.mask, split_seed(seed, static_cast<std::uint64_t>(k))));
    state.graphs.push_back(state.laplacians.back().graph());
  }
  return state;
}

Matrix log_densities(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                     std::optional<double> epsilon) {
  if (state.laplacians.empty()) throw std::invalid_argument("model has no clusters");
  const Index n = state.laplacians.front().size();
  check_signals(signals, n);
  Matrix out(signals.rows(), state.k());
  for (Index k = 0; k < state.k(); ++k) {
    const ClusterDensity density = make_density(state.laplacians[static_cast<std::size_t>(k)], kernel, epsilon);
    const Matrix deviations = signals.rowwise() - state.means[static_cast<std::size_t>(k)].transpose();
    const Matrix projected = deviations * density.basis;
    const Vector quad = projected.array().square().matrix() * density.precision;
    out.col(k) = (density.log_normalizer - 0.5 * quad.array()).matrix();
  }
  return out;
}

Responsibilities e_step(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                        std::optional<double> epsilon, const GroupPrior* prior) {
  return posterior(state, signals, kernel, epsilon, prior).gamma;
}

double surrogate_objective(const ModelState& state, const Matrix& signals, const KernelSpec& kernel,
                           std::optional<double> epsilon, const GroupPrior* prior) {
  return posterior(state, signals, kernel, epsilon, prior).log_likelihood;
}

std::vector<Vector> m_step_means(const Responsibilities& gamma, const Matrix& signals) {
  if (gamma.m() != signals.rows()) throw std::invalid_argument("m_step_means: shape mismatch");
  std::vector<Vector> means;
  for (Index k = 0; k < gamma.k(); ++k) {
    const double mass = gamma.gamma.col(k).sum();
    if (!(mass > 0.0)) {
      std::ostringstream os;
      os << "m_step_means: cluster " << k << " has zero mass";
      throw std::domain_error(os.str());
    }
    means.push_back(signals.transpose() * gamma.gamma.col(k) / mass);
  }
  return means;
}

Vector m_step_weights(const Responsibilities& gamma) {
  Vector alpha = gamma.gamma.colwise().sum().transpose() / static_cast<double>(gamma.m());
  return alpha / alpha.sum();
}

Matrix m_step_group_prior(const Responsibilities& gamma, const GroupPrior& prior) {
  Matrix out = Matrix::Zero(prior.prior.rows(), prior.prior.cols());
  Vector counts = Vector::Zero(prior.prior.rows());
  for (Index m = 0; m < gamma.m(); ++m) {
    const Index g = prior.group_of[static_cast<std::size_t>(m)];
    out.row(g) += gamma.gamma.row(m);
    counts(g) += 1.0;
  }
  for (Index g = 0; g < out.rows(); ++g) {
    if (counts(g) > 0.0)
      out.row(g) /= counts(g);
    else
      out.row(g) = prior.prior.row(g);  // empty group keeps its prior
  }
  return out;
}

std::vector<GraphEstimate> m_step_graphs(const Responsibilities& gamma, const Matrix& signals,
                                         const std::vector<Vector>& means, const FitConfig& config,
                                         const std::vector<Graph>* warm_start) {
  std::vector<GraphEstimate> out;
  for (Index k = 0; k < gamma.k(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    try {
      WeightedSignals ws{signals.rowwise() - means[kk].transpose(), gamma.gamma.col(k)};
      std::optional<Graph> warm;
      if (warm_start && config.warm_start) warm = (*warm_start)[kk];
      if (config.kernel.kind() == KernelKind::Heat) {
        HeatSolverParams p = config.heat;
        p.tau = config.kernel.tau();
        out.push_back(learn_graph_heat(ws, p, config.mask, warm));
      } else {
        SmoothSolverParams p = config.smooth;
        if (config.scale_priors_by_mass) {
          const double mass = ws.mass();
          p.beta1 *= mass;
          p.beta2 *= mass;
        }
        out.push_back(learn_graph_smooth(ws, p, config.mask, warm));
      }
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "graph solve for cluster " << k << " failed: " << e.what();
      throw NumericalError(os.str());
    }
  }
  return out;
}

namespace {

FittedModel fit_once(const Dataset& data, const FitConfig& config, Seed seed, const std::optional<GroupPrior>& prior_in) {
  std::optional<GroupPrior> prior = prior_in;
  const GroupPrior* prior_ptr = prior ? &*prior : nullptr;
  ModelState state = initialize(data, config, seed);
  const Matrix& x = data.signals;
  const Index kk = config.k;

  FittedModel model;
  model.kernel = config.kernel;
  model.epsilon = config.epsilon;
  model.seed = seed;

  Posterior post = posterior(state, x, config.kernel, config.epsilon, prior_ptr);
  model.objective_trace.push_back(post.log_likelihood);
  Rng rescue_rng(split_seed(seed, 0xfeedULL));

  for (int it = 1; it <= config.max_iterations; ++it) {
    const Responsibilities& gamma = post.gamma;
    Vector mass = gamma.gamma.colwise().sum().transpose();

    std::vector<bool> rescued(static_cast<std::size_t>(kk), false);
    if (!prior) {
      std::vector<bool> taken(static_cast<std::size_t>(x.rows()), false);
      for (Index k = 0; k < kk; ++k) {
        if (mass(k) >= config.min_cluster_mass && mass(k) > 0.0) continue;
        Index pick = -1;
        for (Index m = 0; m < x.rows(); ++m) {
          if (taken[static_cast<std::size_t>(m)]) continue;
          if (pick < 0 || gamma.gamma.row(m).maxCoeff() < gamma.gamma.row(pick).maxCoeff()) pick = m;
        }
        taken[static_cast<std::size_t>(pick)] = true;
        rescued[static_cast<std::size_t>(k)] = true;
        state.means[static_cast<std::size_t>(k)] = x.row(pick).transpose();
        state.laplacians[static_cast<std::size_t>(k)] =
            random_laplacian(x.cols(), config.mask, Seed{rescue_rng.next()});
        state.graphs[static_cast<std::size_t>(k)] = state.laplacians[static_cast<std::size_t>(k)].graph();
      }
    }

    // Clusters without mass keep their parameters (rescued or frozen-empty).
    Responsibilities live = gamma;
    for (Index k = 0; k < kk; ++k)
      if (rescued[static_cast<std::size_t>(k)] || !(mass(k) > 0.0)) live.gamma.col(k).setConstant(1.0);

    const std::vector<Vector> means = m_step_means(live, x);
    const std::vector<GraphEstimate> graphs = m_step_graphs(live, x, means, config, &state.graphs);
    for (Index k = 0; k < kk; ++k) {
      const auto c = static_cast<std::size_t>(k);
      if (rescued[c] || !(mass(k) > 0.0)) continue;
      state.means[c] = means[c];
      state.graphs[c] = graphs[c].graph;
      state.laplacians[c] = graphs[c].laplacian;
      if (!graphs[c].converged) ++model.solver_warnings;
    }
    state.alpha = m_step_weights(gamma);
    bool any_rescued = false;
    for (Index k = 0; k < kk; ++k) {
      if (rescued[static_cast<std::size_t>(k)]) {
        state.alpha(k) = 1.0 / static_cast<double>(kk);
        any_rescued = true;
      }
    }
    if (any_rescued) state.alpha /= state.alpha.sum();
    if (prior && !prior->frozen) prior->prior = m_step_group_prior(gamma, *prior);

    Posterior next = posterior(state, x, config.kernel, config.epsilon, prior_ptr);
    model.objective_trace.push_back(next.log_likelihood);
    const double delta = (next.gamma.gamma - gamma.gamma).cwiseAbs().maxCoeff();
    post = std::move(next);
    model.iterations_used = it;
    if (delta < config.convergence_tol && !any_rescued) {
      model.converged = true;
      break;
    }
  }

  model.alpha = state.alpha;
  model.means = state.means;
  model.graphs = state.graphs;
  model.laplacians = state.laplacians;
  model.gamma = post.gamma;
  if (prior) model.group_prior = prior->prior;
  return model;
}

}  // namespace

FittedModel fit(const Dataset& data, const FitConfig& config, Seed seed, const std::optional<GroupPrior>& prior,
                const RestartScore& score) {
  config.validate();
  if (!data.signals.allFinite()) throw std::invalid_argument("fit: signals contain non-finite values");
  if (data.m() < config.k) throw std::invalid_argument("fit: fewer signals than clusters");
  if (prior) prior->validate(data.m(), config.k);

  std::vector<RestartDiagnostic> diagnostics;
  std::optional<FittedModel> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < config.restarts; ++r) {
    RestartDiagnostic diag;
    diag.restart = r;
    diag.seed = config.restarts == 1 ? seed : split_seed(seed, static_cast<std::uint64_t>(r));
    try {
      FittedModel model = fit_once(data, config, diag.seed, prior);
      diag.ok = true;
      diag.final_objective = model.final_objective();
      diag.iterations = model.iterations_used;
      const double s = score ? score(model) : model.final_objective();
      if (!best || s > best_score) {
        best_score = s;
        model.selected_restart = r;
        best = std::move(model);
      }
    } catch (const std::exception& e) {
      diag.ok = false;
      diag.message = e.what();
    }
    diagnostics.push_back(diag);
  }
  if (!best) {
    std::ostringstream os;
    os << "fit: all " << config.restarts << " restarts failed";
    for (const auto& d : diagnostics) os << "\n  restart " << d.restart << ": " << d.message;
    throw FitError(os.str(), diagnostics);
  }
  best->restarts = std::move(diagnostics);
  return std::move(*best);
}

Responsibilities predict(const FittedModel& model, const Matrix& signals) {
  return e_step(model.state(), signals, model.kernel, model.epsilon);
}

}  // namespace glmm
