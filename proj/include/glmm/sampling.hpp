#pragma once

#include "glmm/graph.hpp"
#include "glmm/rng.hpp"

#include <optional>
#include <vector>

namespace glmm {

/// Hard cluster assignments, 0-based, with the cluster count.
struct Labels {
  std::vector<Index> cluster;
  Index k = 0;

  Index size() const { return static_cast<Index>(cluster.size()); }
  /// M x K one-hot matrix.
  Matrix one_hot() const;
  /// Row-wise argmax of a responsibility-like matrix (ties to the lower index).
  static Labels from_argmax(const Matrix& gamma);
  /// Throws std::invalid_argument if an index is outside [0, k).
  void validate() const;
};

/// Ground-truth generative parameters of a graph Laplacian mixture.
struct MixtureModelSpec {
  std::vector<double> alpha;
  std::vector<Vector> means;
  std::vector<Laplacian> laplacians;
  KernelSpec kernel = KernelSpec::smooth();

  Index k() const { return static_cast<Index>(alpha.size()); }
  Index dim() const { return laplacians.empty() ? 0 : laplacians.front().size(); }
  /// alpha on the simplex (1e-12; zero entries allowed), consistent sizes,
  /// valid Laplacians.
  void validate() const;
};

/// Plain Gaussian mixture (used for the Wishart stress test).
struct GaussianMixtureSpec {
  std::vector<double> alpha;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  Index k() const { return static_cast<Index>(alpha.size()); }
  Index dim() const { return means.empty() ? 0 : means.front().size(); }
};

/// M x N signals with optional ground truth.
struct Dataset {
  Matrix signals;
  std::optional<Labels> labels;
  std::optional<MixtureModelSpec> spec;

  Index m() const { return signals.rows(); }
  Index n() const { return signals.cols(); }
};

/// Erdos-Renyi G(n, p) with unit weights, resampled until connected.
/// Throws std::runtime_error after 1000 disconnected draws.
Graph generate_er_connected(Index n, double p, Seed seed);

/// Connected G(n, p) whose edge weights are i.i.d. uniform(lo, hi).
Graph generate_er_weighted(Index n, double p, double lo, double hi, Seed seed);

/// z_m ~ Categorical(alpha), x_m = mu_k + U_k f(Lambda_k)^{1/2} w.
/// The smooth model puts zero variance on the Laplacian null space.
Dataset sample_mixture(const MixtureModelSpec& spec, Index m, Seed seed);

std::vector<Vector> generate_random_means(Index k, Index n, double sigma, Seed seed);

Dataset add_white_noise(const Dataset& d, double sigma, Seed seed);

/// Sigma_k = A A^T / n with A standard normal, mu_k ~ N(0, I) / 2,
/// uniform alpha.
GaussianMixtureSpec generate_wishart_gmm(Index n, Index k, Seed seed);

Dataset sample_gaussian_mixture(const GaussianMixtureSpec& spec, Index m, Seed seed);

/// Relabels a uniformly chosen floor(fraction * M) subset, each to a label
/// drawn uniformly from the other K - 1 clusters.
Labels corrupt_labels(const Labels& z, double noise_fraction, Seed seed);

/// Categorical draw from unnormalised nonnegative weights.
Index sample_categorical(const std::vector<double>& weights, Rng& rng);

}  // namespace glmm
