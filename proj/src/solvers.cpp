#include "glmm/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace glmm {

void WeightedSignals::validate() const {
  if (weights.size() != deviations.rows())
    throw std::invalid_argument("WeightedSignals: weight count does not match signal count");
  if (!deviations.allFinite() || !weights.allFinite())
    throw std::invalid_argument("WeightedSignals: non-finite input");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("WeightedSignals: negative weight");
  if (!(weights.maxCoeff() > 0.0)) throw std::invalid_argument("WeightedSignals: all weights are zero");
}

void SmoothSolverParams::validate() const {
  if (!(beta1 > 0.0)) throw std::invalid_argument("smooth solver: beta1 must be positive");
  if (!(beta2 >= 0.0)) throw std::invalid_argument("smooth solver: beta2 must be nonnegative");
  if (!(tol > 0.0)) throw std::invalid_argument("smooth solver: tol must be positive");
  if (!(step_scale > 0.0 && step_scale <= 1.0)) throw std::invalid_argument("smooth solver: step_scale must be in (0, 1]");
  if (max_iterations < 1) throw std::invalid_argument("smooth solver: max_iterations must be positive");
}

void HeatSolverParams::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("heat solver: tau must be positive");
  if (!(beta >= 0.0)) throw std::invalid_argument("heat solver: beta must be nonnegative");
  if (!(tol > 0.0)) throw std::invalid_argument("heat solver: tol must be positive");
  if (!(eig_floor > 0.0)) throw std::invalid_argument("heat solver: eig_floor must be positive");
  if (max_iterations < 1) throw std::invalid_argument("heat solver: max_iterations must be positive");
}

PairIndex::PairIndex(Index n, const std::optional<EdgeMask>& mask) : n_(n) {
  if (mask && mask->size() != n) throw std::invalid_argument("edge mask size does not match graph size");
  for (Index j = 1; j < n; ++j)
    for (Index i = 0; i < j; ++i)
      if (!mask || mask->allowed(i, j)) pairs_.emplace_back(i, j);
}

Vector PairIndex::gather(const Matrix& symmetric) const {
  Vector w(size());
  for (Index p = 0; p < size(); ++p) w(p) = symmetric(pair(p).first, pair(p).second);
  return w;
}

Graph PairIndex::scatter(const Vector& w) const {
  Matrix m = Matrix::Zero(n_, n_);
  for (Index p = 0; p < size(); ++p) {
    const auto [i, j] = pair(p);
    m(i, j) = m(j, i) = w(p);
  }
  return Graph(std::move(m));
}

Vector PairIndex::degrees(const Vector& w) const {
  Vector d = Vector::Zero(n_);
  for (Index p = 0; p < size(); ++p) {
    d(pair(p).first) += w(p);
    d(pair(p).second) += w(p);
  }
  return d;
}

Vector PairIndex::adjoint_degrees(const Vector& d) const {
  Vector out(size());
  for (Index p = 0; p < size(); ++p) out(p) = d(pair(p).first) + d(pair(p).second);
  return out;
}

Vector PairIndex::pair_counts() const { return degrees(Vector::Ones(size())); }

Matrix pairwise_distance_matrix(const WeightedSignals& ws) {
  ws.validate();
  const Matrix gram = ws.deviations.transpose() * ws.weights.asDiagonal() * ws.deviations;
  const Vector diag = gram.diagonal();
  const Index n = gram.rows();
  Matrix z(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) z(i, j) = i == j ? 0.0 : std::max(0.0, diag(i) + diag(j) - 2.0 * gram(i, j));
  return 0.5 * (z + z.transpose());
}

double smooth_objective(const PairIndex& pairs, const Vector& z, const Vector& w, const SmoothSolverParams& p) {
  const Vector d = pairs.degrees(w);
  const Vector counts = pairs.pair_counts();
  double barrier = 0.0;
  for (Index i = 0; i < d.size(); ++i) {
    if (counts(i) == 0.0) continue;
    if (!(d(i) > 0.0)) return std::numeric_limits<double>::infinity();
    barrier += std::log(d(i));
  }
  return 2.0 * w.dot(z) - p.beta1 * barrier + 2.0 * p.beta2 * w.squaredNorm();
}

GraphEstimate learn_graph_smooth(const WeightedSignals& ws, const SmoothSolverParams& p,
                                 const std::optional<EdgeMask>& mask, const std::optional<Graph>& warm_start) {
  return learn_graph_smooth_from_distances(pairwise_distance_matrix(ws), p, mask, warm_start);
}

GraphEstimate learn_graph_smooth_from_distances(const Matrix& zmat, const SmoothSolverParams& p,
                                                const std::optional<EdgeMask>& mask,
                                                const std::optional<Graph>& warm_start) {
  p.validate();
  const Index n = zmat.rows();
  const PairIndex pairs(n, mask);
  const Vector z = pairs.gather(zmat);
  if (pairs.size() == 0 || !(z.maxCoeff() > 0.0))
    throw std::invalid_argument("learn_graph_smooth: all pairwise distances are zero (degenerate input)");

  const Vector counts = pairs.pair_counts();
  std::vector<Index> active;
  for (Index i = 0; i < n; ++i)
    if (counts(i) > 0.0) active.push_back(i);
  const auto n_active = static_cast<double>(active.size());

  // Solve in normalised units: with w = scale * v the objective equals
  // beta1 * (2 v^T z' - sum log d(v) + 2 b2' ||v||^2) + const, where
  // z' = z / mean(z) and b2' = beta2 beta1 / mean(z)^2. The step size below
  // does not depend on the data scale, so this keeps the iteration count
  // independent of it.
  const double z_mean = z.mean();
  const double scale = p.beta1 / z_mean;
  const Vector zn = z / z_mean;
  const double b2n = p.beta2 * p.beta1 / (z_mean * z_mean);

  // Quadratic term 2 b2' ||v||^2 has gradient 4 b2' v.
  const double curvature = 4.0 * b2n;
  const double step = p.step_scale * 0.999 / (curvature + std::sqrt(2.0 * (static_cast<double>(n) - 1.0)));

  Vector v;
  if (warm_start && warm_start->size() == n) {
    v = pairs.gather(warm_start->weights()) / scale;
    const Vector d = pairs.degrees(v);
    bool usable = true;
    for (Index i : active) usable = usable && d(i) > 0.0;
    if (!usable) v.resize(0);
  }
  if (v.size() == 0) {
    // Best multiple of the all-ones edge vector: root of
    // 4 b2' P c^2 + 2 sum(z') c - n_active = 0.
    const double sum_z = zn.sum();
    const double quad = 4.0 * b2n * static_cast<double>(pairs.size());
    const double c = 2.0 * n_active / (2.0 * sum_z + std::sqrt(4.0 * sum_z * sum_z + 4.0 * quad * n_active));
    v = Vector::Constant(pairs.size(), c);
  }
  // Dual variable starts at the optimal dual for the current primal.
  Vector d = pairs.degrees(v);
  for (Index i = 0; i < n; ++i) d(i) = counts(i) > 0.0 ? -1.0 / d(i) : 0.0;

  GraphEstimate out;
  double best_objective = smooth_objective(pairs, z, scale * v, p);
  Vector best_v = v;
  out.objective_trace.push_back(best_objective);

  for (int it = 1; it <= p.max_iterations; ++it) {
    const Vector y = v - step * (curvature * v + pairs.adjoint_degrees(d));
    const Vector ybar = d + step * pairs.degrees(v);
    const Vector primal = (y - 2.0 * step * zn).cwiseMax(0.0);
    Vector dual(n);
    for (Index i = 0; i < n; ++i)
      dual(i) = counts(i) > 0.0 ? 0.5 * (ybar(i) - std::sqrt(ybar(i) * ybar(i) + 4.0 * step)) : 0.0;
    const Vector q = primal - step * (curvature * primal + pairs.adjoint_degrees(dual));
    const Vector qbar = dual + step * pairs.degrees(primal);

    const Vector v_next = v - y + q;
    const Vector d_next = d - ybar + qbar;
    const double dv = (v_next - v).norm() / std::max(v.norm(), 1e-300);
    const double dd = (d_next - d).norm() / std::max(d.norm(), 1e-300);
    v = v_next.cwiseMax(0.0);
    d = d_next;

    const double objective = smooth_objective(pairs, z, scale * v, p);
    out.objective_trace.push_back(objective);
    if (objective <= best_objective) {
      best_objective = objective;
      best_v = v;
    }
    out.iterations = it;
    if (dv < p.tol && dd < p.tol) {
      out.converged = true;
      break;
    }
  }
  const Vector w = scale * v;
  const Vector best_w = scale * best_v;
  // The last iterate is the converged one; otherwise fall back to the best seen.
  const Vector& result = out.converged && std::isfinite(out.objective_trace.back()) ? w : best_w;
  out.graph = pairs.scatter(result);
  out.laplacian = Laplacian::from_weights(out.graph);
  return out;
}

Matrix weighted_sample_covariance(const WeightedSignals& ws) {
  ws.validate();
  Matrix s = ws.deviations.transpose() * ws.weights.asDiagonal() * ws.deviations / ws.mass();
  return 0.5 * (s + s.transpose());
}

Matrix matrix_log_psd(const Matrix& s, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("matrix_log_psd: floor must be positive");
  const SpectralDecomposition eig = spectral_decompose(s);
  const Vector logs = eig.eigenvalues.cwiseMax(floor).array().log();
  Matrix out = eig.eigenvectors * logs.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (out + out.transpose());
}

namespace {

/// R = A + 2 tau L(w).
Matrix heat_residual(const PairIndex& pairs, const Matrix& log_cov, const Vector& w, double tau) {
  Matrix r = log_cov;
  const Vector d = pairs.degrees(w);
  for (Index i = 0; i < d.size(); ++i) r(i, i) += 2.0 * tau * d(i);
  for (Index p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs.pair(p);
    r(i, j) -= 2.0 * tau * w(p);
    r(j, i) -= 2.0 * tau * w(p);
  }
  return r;
}

}  // namespace

double heat_objective(const PairIndex& pairs, const Matrix& log_cov, const Vector& w, double tau, double beta) {
  return heat_residual(pairs, log_cov, w, tau).squaredNorm() + 2.0 * beta * w.sum();
}

Vector heat_gradient(const PairIndex& pairs, const Matrix& log_cov, const Vector& w, double tau) {
  const Matrix r = heat_residual(pairs, log_cov, w, tau);
  Vector g(pairs.size());
  for (Index p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs.pair(p);
    g(p) = 4.0 * tau * (r(i, i) + r(j, j) - r(i, j) - r(j, i));
  }
  return g;
}

double edge_operator_norm_squared(const PairIndex& pairs, int iterations) {
  if (pairs.size() == 0) return 0.0;
  // B^T B v: entry (i, j) is d_i + d_j + 2 v_ij with d = S v.
  auto apply = [&](const Vector& v) {
    Vector out = pairs.adjoint_degrees(pairs.degrees(v));
    out += 2.0 * v;
    return out;
  };
  Vector v(pairs.size());
  for (Index p = 0; p < v.size(); ++p) v(p) = 1.0 + 0.01 * static_cast<double>(p % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector next = apply(v);
    lambda = v.dot(next);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    v = next / norm;
  }
  return std::max(lambda, v.dot(apply(v)));
}

GraphEstimate learn_graph_heat(const WeightedSignals& ws, const HeatSolverParams& p,
                               const std::optional<EdgeMask>& mask, const std::optional<Graph>& warm_start) {
  return learn_graph_heat_from_covariance(weighted_sample_covariance(ws), p, mask, warm_start);
}

GraphEstimate learn_graph_heat_from_covariance(const Matrix& covariance, const HeatSolverParams& p,
                                               const std::optional<EdgeMask>& mask,
                                               const std::optional<Graph>& warm_start) {
  p.validate();
  const Index n = covariance.rows();
  const PairIndex pairs(n, mask);
  const Matrix log_cov = matrix_log_psd(covariance, p.eig_floor);

  GraphEstimate out;
  if (pairs.size() == 0) {
    out.graph = Graph::empty(n);
    out.laplacian = Laplacian::from_weights(out.graph);
    out.converged = true;
    out.objective_trace.push_back(heat_objective(pairs, log_cov, Vector(0), p.tau, p.beta));
    return out;
  }

  const double lipschitz = 8.0 * p.tau * p.tau * edge_operator_norm_squared(pairs);
  double step = 0.95 / lipschitz;
  const double threshold_per_step = 2.0 * p.beta;
  auto prox = [&](const Vector& v, double s) { return (v.array() - s * threshold_per_step).cwiseMax(0.0).matrix(); };
  auto objective = [&](const Vector& w) { return heat_objective(pairs, log_cov, w, p.tau, p.beta); };

  Vector w;
  if (warm_start && warm_start->size() == n) {
    w = pairs.gather(warm_start->weights());
  } else {
    // log Sigma ~ -2 tau L, so off-diagonals of log Sigma / (2 tau) estimate W.
    w = (pairs.gather(log_cov) / (2.0 * p.tau)).cwiseMax(0.0);
  }
  double f = objective(w);
  out.objective_trace.push_back(f);
  Vector momentum_point = w;
  double t = 1.0;

  for (int it = 1; it <= p.max_iterations; ++it) {
    Vector candidate = prox(momentum_point - step * heat_gradient(pairs, log_cov, momentum_point, p.tau), step);
    double f_candidate = objective(candidate);
    if (f_candidate > f) {
      // Restart from the current iterate; a plain proximal step with a small
      // enough step size cannot increase the objective.
      t = 1.0;
      const Vector g = heat_gradient(pairs, log_cov, w, p.tau);
      for (int halvings = 0; halvings < 60; ++halvings) {
        candidate = prox(w - step * g, step);
        f_candidate = objective(candidate);
        if (f_candidate <= f) break;
        step *= 0.5;
      }
      if (f_candidate > f) {
        candidate = w;
        f_candidate = f;
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    momentum_point = candidate + ((t - 1.0) / t_next) * (candidate - w);
    t = t_next;

    const double change = std::abs(f - f_candidate) / std::max(std::abs(f), 1e-300);
    w = std::move(candidate);
    f = f_candidate;
    out.objective_trace.push_back(f);
    out.iterations = it;
    if (change < p.tol || f == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.graph = pairs.scatter(w);
  out.laplacian = Laplacian::from_weights(out.graph);
  return out;
}

}  // namespace glmm
