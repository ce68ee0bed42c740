#include "glmm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace glmm {

void GmmConfig::validate() const {
  if (k < 1) throw std::invalid_argument("gmm config: k must be positive");
  if (covariance_ridge < 0.0) throw std::invalid_argument("gmm config: ridge must be nonnegative");
  if (restarts < 1) throw std::invalid_argument("gmm config: restarts must be at least 1");
  if (max_iterations < 1) throw std::invalid_argument("gmm config: max_iterations must be positive");
}

void KMeansConfig::validate() const {
  if (k < 1) throw std::invalid_argument("kmeans config: k must be positive");
  if (restarts < 1) throw std::invalid_argument("kmeans config: restarts must be at least 1");
  if (max_iterations < 1) throw std::invalid_argument("kmeans config: max_iterations must be positive");
}

Matrix constant_complement_basis(Index n) {
  Matrix v = Matrix::Zero(n, n - 1);
  for (Index c = 0; c < n - 1; ++c) {
    const auto k = static_cast<double>(c + 1);
    const double scale = 1.0 / std::sqrt(k * (k + 1.0));
    for (Index i = 0; i <= c; ++i) v(i, c) = scale;
    v(c + 1, c) = -k * scale;
  }
  return v;
}

Matrix GmmModel::precision(Index k) const {
  const Matrix& cov = covariances[static_cast<std::size_t>(k)];
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("gmm precision: covariance not positive definite");
  const Matrix inv = llt.solve(Matrix::Identity(cov.rows(), cov.cols()));
  if (!projected) return inv;
  const Matrix v = constant_complement_basis(cov.rows() + 1);
  return v * inv * v.transpose();
}

Matrix GmmModel::covariance_full(Index k) const {
  const Matrix& cov = covariances[static_cast<std::size_t>(k)];
  if (!projected) return cov;
  const Matrix v = constant_complement_basis(cov.rows() + 1);
  return v * cov * v.transpose();
}

namespace {

struct GmmPosterior {
  Responsibilities gamma;
  double log_likelihood = 0.0;
};

GmmPosterior gmm_posterior(const Vector& alpha, const std::vector<Vector>& means, const std::vector<Matrix>& covs,
                           const Matrix& y) {
  const Index m = y.rows();
  const Index kk = alpha.size();
  const auto d = static_cast<double>(y.cols());
  Matrix log_w(m, kk);
  for (Index k = 0; k < kk; ++k) {
    const auto c = static_cast<std::size_t>(k);
    Eigen::LLT<Matrix> llt(covs[c]);
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "gmm: covariance of cluster " << k << " is singular despite the ridge";
      throw NumericalError(os.str());
    }
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Matrix centred = (y.rowwise() - means[c].transpose()).transpose();
    const Matrix solved = llt.matrixL().solve(centred);
    const Vector quad = solved.colwise().squaredNorm().transpose();
    const double log_alpha = alpha(k) > 0.0 ? std::log(alpha(k)) : -std::numeric_limits<double>::infinity();
    log_w.col(k) = (log_alpha - 0.5 * (d * 1.8378770664093454835606594728112 + log_det) - 0.5 * quad.array()).matrix();
  }
  GmmPosterior out;
  out.gamma.gamma.resize(m, kk);
  for (Index row = 0; row < m; ++row) {
    const double top = log_w.row(row).maxCoeff();
    if (!std::isfinite(top)) throw NumericalError("gmm: signal with zero likelihood");
    const Eigen::RowVectorXd e = (log_w.row(row).array() - top).exp().matrix();
    const double total = e.sum();
    out.gamma.gamma.row(row) = e / total;
    out.log_likelihood += top + std::log(total);
  }
  return out;
}

GmmModel gmm_once(const Matrix& y, const GmmConfig& config, Seed seed) {
  const Index m = y.rows();
  const Index d = y.cols();
  const Index kk = config.k;
  Rng rng(seed);
  GmmModel model;
  model.seed = seed;
  model.alpha = Vector::Constant(kk, 1.0 / static_cast<double>(kk));
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index k = 0; k < kk; ++k) {
    const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m - k)));
    std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(j)]);
    model.means.push_back(y.row(order[static_cast<std::size_t>(k)]).transpose());
  }
  const Vector global_mean = y.colwise().mean().transpose();
  const Matrix centred = y.rowwise() - global_mean.transpose();
  const Matrix global_cov = centred.transpose() * centred / static_cast<double>(m) +
                            config.covariance_ridge * Matrix::Identity(d, d);
  model.covariances.assign(static_cast<std::size_t>(kk), global_cov);

  GmmPosterior post = gmm_posterior(model.alpha, model.means, model.covariances, y);
  model.log_likelihood_trace.push_back(post.log_likelihood);
  for (int it = 1; it <= config.max_iterations; ++it) {
    const Matrix& g = post.gamma.gamma;
    for (Index k = 0; k < kk; ++k) {
      const auto c = static_cast<std::size_t>(k);
      const double mass = g.col(k).sum();
      model.alpha(k) = mass / static_cast<double>(m);
      if (!(mass > 1e-12)) continue;  // keep parameters of an emptied component
      model.means[c] = y.transpose() * g.col(k) / mass;
      const Matrix dev = y.rowwise() - model.means[c].transpose();
      Matrix cov = dev.transpose() * g.col(k).asDiagonal() * dev / mass;
      cov = 0.5 * (cov + cov.transpose());
      cov.diagonal().array() += config.covariance_ridge;
      model.covariances[c] = std::move(cov);
    }
    model.alpha /= model.alpha.sum();
    GmmPosterior next = gmm_posterior(model.alpha, model.means, model.covariances, y);
    const double change = std::abs(next.log_likelihood - post.log_likelihood) /
                          std::max(1.0, std::abs(post.log_likelihood));
    post = std::move(next);
    model.log_likelihood_trace.push_back(post.log_likelihood);
    model.iterations_used = it;
    if (change < config.tol) break;
  }
  model.gamma = post.gamma;
  return model;
}

}  // namespace

GmmModel fit_gmm(const Dataset& data, const GmmConfig& config, Seed seed) {
  config.validate();
  if (data.m() <= config.k) throw std::invalid_argument("fit_gmm: need more signals than clusters");
  if (!data.signals.allFinite()) throw std::invalid_argument("fit_gmm: non-finite signals");
  const Matrix y = config.project_constant_out ? Matrix(data.signals * constant_complement_basis(data.n()))
                                               : data.signals;
  std::optional<GmmModel> best;
  std::string last_error;
  for (int r = 0; r < config.restarts; ++r) {
    const Seed s = config.restarts == 1 ? seed : split_seed(seed, static_cast<std::uint64_t>(r));
    try {
      GmmModel model = gmm_once(y, config, s);
      if (!best || model.log_likelihood_trace.back() > best->log_likelihood_trace.back()) best = std::move(model);
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw NumericalError("fit_gmm: every restart failed: " + last_error);
  best->projected = config.project_constant_out;
  return std::move(*best);
}

Responsibilities predict_gmm(const GmmModel& model, const Matrix& signals) {
  const Matrix y = model.projected ? Matrix(signals * constant_complement_basis(signals.cols())) : signals;
  return gmm_posterior(model.alpha, model.means, model.covariances, y).gamma;
}

Graph top_edges_from_precision(const Matrix& precision, Index edge_count) {
  const Index n = precision.rows();
  const Index pairs = n * (n - 1) / 2;
  if (edge_count < 0 || edge_count > pairs) throw std::invalid_argument("precision_to_graph: edge_count out of range");
  struct Entry {
    double magnitude;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) entries.push_back({std::abs(0.5 * (precision(i, j) + precision(j, i))), i, j});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  Matrix w = Matrix::Zero(n, n);
  for (Index e = 0; e < edge_count; ++e) w(entries[static_cast<std::size_t>(e)].i, entries[static_cast<std::size_t>(e)].j) =
      w(entries[static_cast<std::size_t>(e)].j, entries[static_cast<std::size_t>(e)].i) = 1.0;
  return Graph(std::move(w));
}

Graph precision_to_graph(const Matrix& sigma, Index edge_count) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("precision_to_graph: covariance is singular");
  return top_edges_from_precision(llt.solve(Matrix::Identity(sigma.rows(), sigma.cols())), edge_count);
}

namespace {

KMeansResult kmeans_once(const Matrix& x, const KMeansConfig& config, Seed seed) {
  const Index m = x.rows();
  const Index kk = config.k;
  Rng rng(seed);
  std::vector<Vector> centers;
  centers.push_back(x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)))).transpose());
  Vector nearest = Vector::Constant(m, std::numeric_limits<double>::infinity());
  while (static_cast<Index>(centers.size()) < kk) {
    Index far = 0;
    for (Index row = 0; row < m; ++row) {
      nearest(row) = std::min(nearest(row), (x.row(row).transpose() - centers.back()).squaredNorm());
      if (nearest(row) > nearest(far)) far = row;
    }
    centers.push_back(x.row(far).transpose());
  }

  KMeansResult out;
  out.labels.k = kk;
  out.labels.cluster.assign(static_cast<std::size_t>(m), -1);
  for (int it = 0; it < config.max_iterations; ++it) {
    bool changed = false;
    double cost = 0.0;
    for (Index row = 0; row < m; ++row) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < kk; ++k) {
        const double dist = (x.row(row).transpose() - centers[static_cast<std::size_t>(k)]).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = k;
        }
      }
      cost += best_d;
      auto& label = out.labels.cluster[static_cast<std::size_t>(row)];
      if (label != best) {
        label = best;
        changed = true;
      }
    }
    out.cost_trace.push_back(cost);
    if (!changed) break;
    std::vector<Vector> sums(static_cast<std::size_t>(kk), Vector::Zero(x.cols()));
    std::vector<Index> counts(static_cast<std::size_t>(kk), 0);
    for (Index row = 0; row < m; ++row) {
      const auto c = static_cast<std::size_t>(out.labels.cluster[static_cast<std::size_t>(row)]);
      sums[c] += x.row(row).transpose();
      ++counts[c];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
  }
  // Cost of the final assignment against the final centres.
  double cost = 0.0;
  for (Index row = 0; row < m; ++row)
    cost += (x.row(row).transpose() - centers[static_cast<std::size_t>(out.labels.cluster[static_cast<std::size_t>(row)])])
                .squaredNorm();
  out.cost = cost;
  out.centers = std::move(centers);
  return out;
}

}  // namespace

KMeansResult fit_kmeans(const Dataset& data, const KMeansConfig& config, Seed seed) {
  config.validate();
  if (data.m() < config.k) throw std::invalid_argument("fit_kmeans: fewer signals than clusters");
  std::optional<KMeansResult> best;
  for (int r = 0; r < config.restarts; ++r) {
    const Seed s = config.restarts == 1 ? seed : split_seed(seed, static_cast<std::uint64_t>(r));
    KMeansResult result = kmeans_once(data.signals, config, s);
    if (!best || result.cost < best->cost) best = std::move(result);
  }
  return std::move(*best);
}

std::vector<std::optional<GraphEstimate>> graphs_for_labels(const Matrix& signals, const Labels& labels,
                                                            const SmoothSolverParams& solver,
                                                            bool scale_priors_by_mass,
                                                            const std::optional<EdgeMask>& mask) {
  const Responsibilities hard{labels.one_hot()};
  std::vector<std::optional<GraphEstimate>> out;
  for (Index k = 0; k < labels.k; ++k) {
    const Vector weights = hard.gamma.col(k);
    const double mass = weights.sum();
    if (!(mass > 0.0)) {
      out.emplace_back(std::nullopt);
      continue;
    }
    const Vector mean = signals.transpose() * weights / mass;
    WeightedSignals ws{signals.rowwise() - mean.transpose(), weights};
    SmoothSolverParams p = solver;
    if (scale_priors_by_mass) {
      p.beta1 *= mass;
      p.beta2 *= mass;
    }
    out.emplace_back(learn_graph_smooth(ws, p, mask));
  }
  return out;
}

KMeansGraphResult kmeans_plus_graph_learning(const Dataset& data, const KMeansConfig& config,
                                             const SmoothSolverParams& solver, Seed seed, bool scale_priors_by_mass,
                                             const std::optional<EdgeMask>& mask) {
  KMeansGraphResult out;
  out.clustering = fit_kmeans(data, config, seed);
  out.graphs = graphs_for_labels(data.signals, out.clustering.labels, solver, scale_priors_by_mass, mask);
  return out;
}

}  // namespace glmm
