#pragma once

#include "glmm/em.hpp"
#include "glmm/graph.hpp"
#include "glmm/rng.hpp"
#include "glmm/sampling.hpp"
#include "glmm/solvers.hpp"

#include <optional>
#include <vector>

namespace glmm {

struct GmmConfig {
  Index k = 2;
  int max_iterations = 200;
  double tol = 1e-6;  // relative log-likelihood change
  double covariance_ridge = 1e-6;
  /// Fit in the (N-1)-dimensional complement of the constant vector.
  bool project_constant_out = true;
  int restarts = 1;

  void validate() const;
};

struct GmmModel {
  Vector alpha;
  /// Means and covariances live in the fitted space: N-1 dimensional when
  /// `projected`, N otherwise.
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  bool projected = false;
  Responsibilities gamma;
  std::vector<double> log_likelihood_trace;
  int iterations_used = 0;
  Seed seed;

  /// Precision in the original N coordinates (V Sigma^{-1} V^T when projected).
  Matrix precision(Index k) const;
  /// Covariance in the original N coordinates.
  Matrix covariance_full(Index k) const;
};

/// Orthonormal N x (N-1) basis of the complement of the constant vector
/// (Helmert contrasts).
Matrix constant_complement_basis(Index n);

GmmModel fit_gmm(const Dataset& data, const GmmConfig& config, Seed seed);
Responsibilities predict_gmm(const GmmModel& model, const Matrix& signals);

/// Keeps the `edge_count` largest off-diagonal |P_ij| as unit edges; ties go
/// to the lexicographically smaller (i, j).
Graph top_edges_from_precision(const Matrix& precision, Index edge_count);
/// Inverts Sigma (throws NumericalError if not positive definite) and calls
/// top_edges_from_precision.
Graph precision_to_graph(const Matrix& sigma, Index edge_count);

struct KMeansConfig {
  Index k = 2;
  int max_iterations = 300;
  int restarts = 10;

  void validate() const;
};

struct KMeansResult {
  Labels labels;
  std::vector<Vector> centers;
  double cost = 0.0;
  std::vector<double> cost_trace;
};

/// Lloyd iterations after farthest-point seeding from a random first
/// centre; the restart with the lowest within-cluster sum of squares wins.
KMeansResult fit_kmeans(const Dataset& data, const KMeansConfig& config, Seed seed);

struct KMeansGraphResult {
  KMeansResult clustering;
  /// Absent for empty clusters.
  std::vector<std::optional<GraphEstimate>> graphs;
};

/// K-means labels, then per cluster learn_graph_smooth on the members
/// centred by their mean. `scale_priors_by_mass` mirrors FitConfig.
KMeansGraphResult kmeans_plus_graph_learning(const Dataset& data, const KMeansConfig& config,
                                             const SmoothSolverParams& solver, Seed seed,
                                             bool scale_priors_by_mass = true,
                                             const std::optional<EdgeMask>& mask = std::nullopt);

/// Per-cluster smooth graph learning for fixed hard labels.
std::vector<std::optional<GraphEstimate>> graphs_for_labels(const Matrix& signals, const Labels& labels,
                                                            const SmoothSolverParams& solver,
                                                            bool scale_priors_by_mass = true,
                                                            const std::optional<EdgeMask>& mask = std::nullopt);

}  // namespace glmm
