#include "glmm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace glmm {

Matrix Labels::one_hot() const {
  Matrix z = Matrix::Zero(size(), k);
  for (Index m = 0; m < size(); ++m) z(m, cluster[static_cast<std::size_t>(m)]) = 1.0;
  return z;
}

Labels Labels::from_argmax(const Matrix& gamma) {
  Labels out;
  out.k = gamma.cols();
  out.cluster.resize(static_cast<std::size_t>(gamma.rows()));
  for (Index m = 0; m < gamma.rows(); ++m) {
    Index best = 0;
    for (Index k = 1; k < gamma.cols(); ++k)
      if (gamma(m, k) > gamma(m, best)) best = k;
    out.cluster[static_cast<std::size_t>(m)] = best;
  }
  return out;
}

void Labels::validate() const {
  for (Index c : cluster)
    if (c < 0 || c >= k) throw std::invalid_argument("label outside [0, K)");
}

void MixtureModelSpec::validate() const {
  const std::size_t kk = alpha.size();
  if (kk == 0) throw std::invalid_argument("mixture spec: K must be positive");
  if (means.size() != kk || laplacians.size() != kk)
    throw std::invalid_argument("mixture spec: alpha, means and laplacians differ in length");
  double total = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("mixture spec: alpha entries must be nonnegative");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture spec: alpha must sum to 1");
  const Index n = laplacians.front().size();
  for (std::size_t k = 0; k < kk; ++k) {
    if (laplacians[k].size() != n || means[k].size() != n)
      throw std::invalid_argument("mixture spec: inconsistent dimensions");
    const auto report = validate_laplacian(laplacians[k].matrix());
    if (!report.passed()) throw std::invalid_argument("mixture spec: " + report.describe());
  }
}

Index sample_categorical(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  Index last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = static_cast<Index>(k);
    if (u < weights[k]) return static_cast<Index>(k);
    u -= weights[k];
  }
  return last_positive;
}

namespace {

Graph draw_er(Index n, double p, Rng& rng, double lo, double hi, bool weighted) {
  Matrix w = Matrix::Zero(n, n);
  for (Index j = 1; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      if (rng.bernoulli(p)) {
        const double value = weighted ? rng.uniform(lo, hi) : 1.0;
        w(i, j) = w(j, i) = value;
      }
    }
  }
  return Graph(std::move(w));
}

Graph er_connected(Index n, double p, Seed seed, double lo, double hi, bool weighted) {
  if (n < 2) throw std::invalid_argument("generate_er_connected: n must be at least 2");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("generate_er_connected: p must be in (0, 1]");
  Rng rng(seed);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Graph g = draw_er(n, p, rng, lo, hi, weighted);
    if (is_connected(Laplacian::from_weights(g))) return g;
  }
  std::ostringstream os;
  os << "generate_er_connected: no connected G(" << n << ", " << p << ") sample in " << kMaxAttempts
     << " attempts; p is too small for n";
  throw std::runtime_error(os.str());
}

/// Columns scaled so that factor * factor^T is the kernel covariance.
Matrix covariance_factor(const Laplacian& l, const KernelSpec& kernel) {
  const SpectralDecomposition eig = spectral_decompose(l);
  const Vector& lambda = eig.eigenvalues;
  Vector scale(lambda.size());
  if (kernel.kind() == KernelKind::Smooth) {
    const double cutoff = kRankTolerance * std::max(0.0, lambda.maxCoeff());
    for (Index i = 0; i < lambda.size(); ++i)
      scale(i) = lambda(i) > cutoff && lambda(i) > 0.0 ? 1.0 / std::sqrt(lambda(i)) : 0.0;
  } else {
    scale = (-kernel.tau() * lambda).array().exp();
  }
  return eig.eigenvectors * scale.asDiagonal();
}

}  // namespace

Graph generate_er_connected(Index n, double p, Seed seed) { return er_connected(n, p, seed, 1.0, 1.0, false); }

Graph generate_er_weighted(Index n, double p, double lo, double hi, Seed seed) {
  return er_connected(n, p, seed, lo, hi, true);
}

Dataset sample_mixture(const MixtureModelSpec& spec, Index m, Seed seed) {
  if (m < 1) throw std::invalid_argument("sample_mixture: m must be positive");
  spec.validate();
  const Index n = spec.dim();
  std::vector<Matrix> factors;
  for (const auto& l : spec.laplacians) factors.push_back(covariance_factor(l, spec.kernel));

  Rng rng(seed);
  Dataset d;
  d.signals.resize(m, n);
  Labels labels;
  labels.k = spec.k();
  labels.cluster.resize(static_cast<std::size_t>(m));
  Vector w(n);
  for (Index row = 0; row < m; ++row) {
    const Index k = sample_categorical(spec.alpha, rng);
    labels.cluster[static_cast<std::size_t>(row)] = k;
    for (Index i = 0; i < n; ++i) w(i) = rng.normal();
    d.signals.row(row) = (spec.means[static_cast<std::size_t>(k)] + factors[static_cast<std::size_t>(k)] * w).transpose();
  }
  d.labels = std::move(labels);
  d.spec = spec;
  return d;
}

std::vector<Vector> generate_random_means(Index k, Index n, double sigma, Seed seed) {
  if (sigma < 0.0) throw std::invalid_argument("generate_random_means: sigma must be nonnegative");
  Rng rng(seed);
  std::vector<Vector> means;
  for (Index c = 0; c < k; ++c) {
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = sigma * rng.normal();
    means.push_back(std::move(mu));
  }
  return means;
}

Dataset add_white_noise(const Dataset& d, double sigma, Seed seed) {
  if (sigma < 0.0) throw std::invalid_argument("add_white_noise: sigma must be nonnegative");
  Dataset out = d;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (Index r = 0; r < out.signals.rows(); ++r)
    for (Index c = 0; c < out.signals.cols(); ++c) out.signals(r, c) += sigma * rng.normal();
  return out;
}

GaussianMixtureSpec generate_wishart_gmm(Index n, Index k, Seed seed) {
  if (n < 2) throw std::invalid_argument("generate_wishart_gmm: n must be at least 2");
  if (k < 1) throw std::invalid_argument("generate_wishart_gmm: k must be positive");
  Rng rng(seed);
  GaussianMixtureSpec spec;
  spec.alpha.assign(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
  for (Index c = 0; c < k; ++c) {
    Matrix a(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) a(i, j) = rng.normal();
    Matrix sigma = a * a.transpose() / static_cast<double>(n);
    spec.covariances.push_back(0.5 * (sigma + sigma.transpose()));
  }
  for (Index c = 0; c < k; ++c) {
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = 0.5 * rng.normal();
    spec.means.push_back(std::move(mu));
  }
  return spec;
}

Dataset sample_gaussian_mixture(const GaussianMixtureSpec& spec, Index m, Seed seed) {
  if (m < 1) throw std::invalid_argument("sample_gaussian_mixture: m must be positive");
  const Index n = spec.dim();
  std::vector<Matrix> factors;
  for (const auto& cov : spec.covariances) {
    // Eigen-based square root tolerates singular Wishart draws.
    const SpectralDecomposition eig = spectral_decompose(cov);
    const Vector root = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    factors.push_back(eig.eigenvectors * root.asDiagonal());
  }
  Rng rng(seed);
  Dataset d;
  d.signals.resize(m, n);
  Labels labels;
  labels.k = spec.k();
  labels.cluster.resize(static_cast<std::size_t>(m));
  Vector w(n);
  for (Index row = 0; row < m; ++row) {
    const Index k = sample_categorical(spec.alpha, rng);
    labels.cluster[static_cast<std::size_t>(row)] = k;
    for (Index i = 0; i < n; ++i) w(i) = rng.normal();
    d.signals.row(row) = (spec.means[static_cast<std::size_t>(k)] + factors[static_cast<std::size_t>(k)] * w).transpose();
  }
  d.labels = std::move(labels);
  return d;
}

Labels corrupt_labels(const Labels& z, double noise_fraction, Seed seed) {
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0))
    throw std::invalid_argument("corrupt_labels: noise_fraction must be in [0, 1]");
  Labels out = z;
  const Index m = z.size();
  const auto flips = static_cast<Index>(std::floor(noise_fraction * static_cast<double>(m)));
  if (flips == 0 || z.k < 2) return out;
  Rng rng(seed);
  // Partial Fisher-Yates: the first `flips` entries form a uniform subset.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < flips; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  for (Index i = 0; i < flips; ++i) {
    auto& label = out.cluster[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    auto other = static_cast<Index>(rng.below(static_cast<std::uint64_t>(z.k - 1)));
    if (other >= label) ++other;
    label = other;
  }
  return out;
}

}  // namespace glmm
