#include "glmm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace glmm {
namespace {

void check_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Graph::Graph(Matrix weights) : weights_(std::move(weights)) {
  check_square(weights_, "Graph");
  const Index n = weights_.rows();
  for (Index i = 0; i < n; ++i) {
    if (weights_(i, i) != 0.0) throw std::invalid_argument("Graph: nonzero diagonal entry");
    for (Index j = 0; j < n; ++j) {
      const double w = weights_(i, j);
      if (!std::isfinite(w)) throw std::invalid_argument("Graph: non-finite weight");
      if (w < 0.0) throw std::invalid_argument("Graph: negative weight");
      if (w != weights_(j, i)) throw std::invalid_argument("Graph: weights not symmetric");
    }
  }
}

Graph Graph::empty(Index n) { return Graph(Matrix::Zero(n, n)); }

Graph Graph::symmetrized(const Matrix& raw) {
  check_square(raw, "Graph::symmetrized");
  Matrix w = 0.5 * (raw + raw.transpose());
  w.diagonal().setZero();
  return Graph(std::move(w));
}

Index Graph::edge_count() const {
  Index count = 0;
  for (Index j = 1; j < size(); ++j)
    for (Index i = 0; i < j; ++i)
      if (weights_(i, j) > 0.0) ++count;
  return count;
}

BoolMatrix Graph::support() const { return weights_.array() > 0.0; }

Laplacian Laplacian::from_weights(const Graph& g) {
  const Matrix& w = g.weights();
  Matrix l = -w;
  l.diagonal() = w.rowwise().sum();
  return Laplacian(std::move(l));
}

Laplacian Laplacian::from_matrix(Matrix m, double tol) {
  const ValidityReport report = validate_laplacian(m, tol);
  if (!report.passed()) throw std::invalid_argument("invalid Laplacian: " + report.describe());
  return Laplacian(std::move(m));
}

Graph Laplacian::graph() const {
  const Index n = size();
  Matrix w(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      w(i, j) = i == j ? 0.0 : std::max(0.0, -0.5 * (matrix_(i, j) + matrix_(j, i)));
  return Graph(std::move(w));
}

std::string ValidityReport::describe() const {
  if (violations.empty()) return "valid";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].condition << " (worst " << violations[i].magnitude << ")";
  }
  return os.str();
}

ValidityReport validate_laplacian(const Matrix& m, double tol) {
  check_square(m, "validate_laplacian");
  ValidityReport report;
  if (!m.allFinite()) {
    report.finite = false;
    report.violations.push_back({"non-finite entries", std::numeric_limits<double>::infinity()});
    return report;
  }
  const Index n = m.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      report.max_asymmetry = std::max(report.max_asymmetry, std::abs(m(i, j) - m(j, i)));
      if (i != j) report.max_positive_offdiagonal = std::max(report.max_positive_offdiagonal, m(i, j));
    }
    report.max_abs_row_sum = std::max(report.max_abs_row_sum, std::abs(m.row(i).sum()));
  }
  if (report.max_asymmetry > tol) report.violations.push_back({"symmetry", report.max_asymmetry});
  if (report.max_positive_offdiagonal > tol)
    report.violations.push_back({"off-diagonal sign", report.max_positive_offdiagonal});
  if (report.max_abs_row_sum > tol) report.violations.push_back({"row sums", report.max_abs_row_sum});
  return report;
}

SpectralDecomposition spectral_decompose(const Matrix& symmetric) {
  check_square(symmetric, "spectral_decompose");
  if (!symmetric.allFinite()) throw NumericalError("spectral_decompose: non-finite input");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success)
    throw NumericalError("spectral_decompose: eigensolver did not converge");
  // Eigen already returns ascending eigenvalues.
  return {solver.eigenvalues(), solver.eigenvectors()};
}

SpectralDecomposition spectral_decompose(const Laplacian& l) { return spectral_decompose(l.matrix()); }

double smoothness(const Vector& x, const Laplacian& l) {
  if (x.size() != l.size()) throw std::invalid_argument("smoothness: dimension mismatch");
  return x.dot(l.matrix() * x);
}

KernelSpec KernelSpec::heat(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("heat kernel requires tau > 0");
  return KernelSpec(KernelKind::Heat, tau);
}

std::string KernelSpec::name() const { return kind_ == KernelKind::Heat ? "heat" : "smooth"; }

Matrix pseudo_inverse(const SpectralDecomposition& eig) {
  const Vector& lambda = eig.eigenvalues;
  const double cutoff = kRankTolerance * std::max(0.0, lambda.size() ? lambda.maxCoeff() : 0.0);
  Vector inv(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i) inv(i) = lambda(i) > cutoff && lambda(i) > 0.0 ? 1.0 / lambda(i) : 0.0;
  const Matrix& u = eig.eigenvectors;
  Matrix out = u * inv.asDiagonal() * u.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix kernel_covariance(const Laplacian& l, const KernelSpec& kernel) {
  const SpectralDecomposition eig = spectral_decompose(l);
  if (kernel.kind() == KernelKind::Smooth) return pseudo_inverse(eig);
  const Vector filtered = (-2.0 * kernel.tau() * eig.eigenvalues).array().exp();
  Matrix out = eig.eigenvectors * filtered.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (out + out.transpose());
}

bool is_connected(const Laplacian& l, double tol) {
  if (l.size() <= 1) return true;
  return spectral_decompose(l).eigenvalues(1) > tol;
}

Graph threshold_graph(const Graph& g, double theta) {
  if (theta < 0.0) throw std::invalid_argument("threshold_graph: theta must be nonnegative");
  Matrix w = g.weights();
  for (Index j = 0; j < w.cols(); ++j)
    for (Index i = 0; i < w.rows(); ++i)
      if (w(i, j) < theta) w(i, j) = 0.0;
  return Graph(std::move(w));
}

EdgeMask::EdgeMask(BoolMatrix allowed) : allowed_(std::move(allowed)) {
  if (allowed_.rows() != allowed_.cols()) throw std::invalid_argument("EdgeMask: matrix must be square");
  for (Index i = 0; i < allowed_.rows(); ++i) {
    if (allowed_(i, i)) throw std::invalid_argument("EdgeMask: diagonal must be false");
    for (Index j = 0; j < i; ++j)
      if (allowed_(i, j) != allowed_(j, i)) throw std::invalid_argument("EdgeMask: not symmetric");
  }
}

EdgeMask EdgeMask::all(Index n) {
  BoolMatrix m = BoolMatrix::Constant(n, n, true);
  m.matrix().diagonal().setConstant(false);
  return EdgeMask(std::move(m));
}

EdgeMask EdgeMask::within_hops(const Graph& base, int hops) {
  const Index n = base.size();
  BoolMatrix m = BoolMatrix::Constant(n, n, false);
  for (Index source = 0; source < n; ++source) {
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::deque<Index> queue{source};
    dist[static_cast<std::size_t>(source)] = 0;
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      if (dist[static_cast<std::size_t>(v)] == hops) continue;
      for (Index u = 0; u < n; ++u) {
        if (base.weight(v, u) > 0.0 && dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
          queue.push_back(u);
        }
      }
    }
    for (Index u = 0; u < n; ++u) m(source, u) = u != source && dist[static_cast<std::size_t>(u)] > 0;
  }
  return EdgeMask(std::move(m));
}

EdgeMask EdgeMask::grid(Index rows, Index cols, int hops) {
  const Index n = rows * cols;
  Matrix w = Matrix::Zero(n, n);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index v = r * cols + c;
      if (c + 1 < cols) w(v, v + 1) = w(v + 1, v) = 1.0;
      if (r + 1 < rows) w(v, v + cols) = w(v + cols, v) = 1.0;
    }
  }
  return within_hops(Graph(std::move(w)), hops);
}

}  // namespace glmm
