#pragma once

#include "glmm/graph.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace glmm {

/// Deviations y_m = x_m - mu_k (rows) with per-signal weights gamma_{m,k}.
struct WeightedSignals {
  Matrix deviations;
  Vector weights;

  Index dim() const { return deviations.cols(); }
  double mass() const { return weights.sum(); }
  /// Nonnegative finite weights, at least one positive, matching row count.
  void validate() const;
};

/// Weight-space problem
///   min_{w >= 0}  2 w^T z - beta1 sum_i log d_i(w) + beta2 ||W||_F^2
/// over the upper-triangular edge vector w (||W||_F^2 = 2 ||w||^2).
struct SmoothSolverParams {
  double beta1 = 1.0;
  double beta2 = 0.5;
  int max_iterations = 5000;
  double tol = 1e-8;
  /// Fraction of the largest admissible primal-dual step.
  double step_scale = 0.95;

  void validate() const;
};

/// min_{W in W} ||log Sigma + 2 tau L||_F^2 + beta ||W||_1.
struct HeatSolverParams {
  double tau = 0.5;
  double beta = 0.1;
  int max_iterations = 5000;
  double tol = 1e-8;
  double eig_floor = 1e-6;

  void validate() const;
};

struct GraphEstimate {
  Graph graph;
  Laplacian laplacian;
  int iterations = 0;
  /// False when max_iterations ran out; the best iterate is still returned.
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Unordered vertex pairs (i < j) that are free variables, in column-major
/// upper-triangular order, optionally restricted by a mask.
class PairIndex {
 public:
  explicit PairIndex(Index n, const std::optional<EdgeMask>& mask = std::nullopt);

  Index vertex_count() const { return n_; }
  Index size() const { return static_cast<Index>(pairs_.size()); }
  const std::pair<Index, Index>& pair(Index p) const { return pairs_[static_cast<std::size_t>(p)]; }

  Vector gather(const Matrix& symmetric) const;
  Graph scatter(const Vector& w) const;
  /// Degrees d = S w.
  Vector degrees(const Vector& w) const;
  /// S^T d: entry (i, j) maps to d_i + d_j.
  Vector adjoint_degrees(const Vector& d) const;
  /// Number of free pairs touching each vertex.
  Vector pair_counts() const;

 private:
  Index n_;
  std::vector<std::pair<Index, Index>> pairs_;
};

/// Z_ij = sum_m gamma_m (y_{m,i} - y_{m,j})^2.
Matrix pairwise_distance_matrix(const WeightedSignals& ws);

/// Value of the smooth weight-space objective for edge vector w; vertices
/// without any free pair are excluded from the log-barrier.
double smooth_objective(const PairIndex& pairs, const Vector& z, const Vector& w, const SmoothSolverParams& p);

/// Primal-dual (forward-backward-forward) splitting for the smooth
/// objective. Masked-out pairs stay exactly zero.
GraphEstimate learn_graph_smooth(const WeightedSignals& ws, const SmoothSolverParams& p,
                                 const std::optional<EdgeMask>& mask = std::nullopt,
                                 const std::optional<Graph>& warm_start = std::nullopt);
GraphEstimate learn_graph_smooth_from_distances(const Matrix& z, const SmoothSolverParams& p,
                                                const std::optional<EdgeMask>& mask = std::nullopt,
                                                const std::optional<Graph>& warm_start = std::nullopt);

/// Sigma = sum_m gamma_m y_m y_m^T / sum_m gamma_m.
Matrix weighted_sample_covariance(const WeightedSignals& ws);

/// U log(max(Lambda, floor)) U^T.
Matrix matrix_log_psd(const Matrix& s, double floor);

/// ||A + 2 tau L(w)||_F^2 + 2 beta sum(w) for w >= 0 (the l1 norm of the
/// full symmetric W counts every edge twice).
double heat_objective(const PairIndex& pairs, const Matrix& log_cov, const Vector& w, double tau, double beta);
/// Gradient of the Frobenius term only, with respect to the edge vector.
Vector heat_gradient(const PairIndex& pairs, const Matrix& log_cov, const Vector& w, double tau);
/// Largest eigenvalue of B^T B for the linear map B: w -> L(w), by power
/// iteration.
double edge_operator_norm_squared(const PairIndex& pairs, int iterations = 200);

/// FISTA with objective-based momentum restart on the log-covariance
/// matching problem.
GraphEstimate learn_graph_heat(const WeightedSignals& ws, const HeatSolverParams& p,
                               const std::optional<EdgeMask>& mask = std::nullopt,
                               const std::optional<Graph>& warm_start = std::nullopt);
GraphEstimate learn_graph_heat_from_covariance(const Matrix& covariance, const HeatSolverParams& p,
                                               const std::optional<EdgeMask>& mask = std::nullopt,
                                               const std::optional<Graph>& warm_start = std::nullopt);

}  // namespace glmm
