#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace glmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when an eigensolver, factorization or iterative method cannot
/// produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultLaplacianTol = 1e-8;
/// Eigenvalues at or below kRankTolerance * lambda_max count as zero.
inline constexpr double kRankTolerance = 1e-9;

/// Undirected weighted graph stored as a dense weight matrix.
/// Invariants: exactly symmetric, zero diagonal, nonnegative finite entries.
class Graph {
 public:
  Graph() = default;
  /// Throws std::invalid_argument unless `weights` satisfies the invariants
  /// exactly.
  explicit Graph(Matrix weights);

  static Graph empty(Index n);
  /// Ingestion path for external data: (W + W^T) / 2 with the diagonal
  /// cleared. Negative or non-finite entries are still rejected.
  static Graph symmetrized(const Matrix& raw);

  Index size() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }
  double weight(Index i, Index j) const { return weights_(i, j); }
  /// Number of unordered pairs i < j with positive weight.
  Index edge_count() const;
  /// Support as a boolean matrix (true where W_ij > 0).
  BoolMatrix support() const;

 private:
  Matrix weights_;
};

/// Combinatorial Laplacian L = D - W.
class Laplacian {
 public:
  Laplacian() = default;

  static Laplacian from_weights(const Graph& g);
  /// Wraps an arbitrary matrix after validate_laplacian(m, tol) succeeds;
  /// throws std::invalid_argument listing the violations otherwise.
  static Laplacian from_matrix(Matrix m, double tol = kDefaultLaplacianTol);

  Index size() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  /// Weight matrix recovered from the off-diagonal part (tiny negative
  /// round-off clipped to zero).
  Graph graph() const;

 private:
  explicit Laplacian(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

struct LaplacianViolation {
  std::string condition;  // "symmetry", "off-diagonal sign", "row sums", ...
  double magnitude = 0.0;
};

struct ValidityReport {
  double max_asymmetry = 0.0;
  double max_positive_offdiagonal = 0.0;
  double max_abs_row_sum = 0.0;
  bool finite = true;
  std::vector<LaplacianViolation> violations;

  bool passed() const { return violations.empty(); }
  std::string describe() const;
};

/// Checks symmetry, nonpositive off-diagonals and zero row sums, each
/// against `tol`. Throws std::invalid_argument on a non-square input.
ValidityReport validate_laplacian(const Matrix& m, double tol = kDefaultLaplacianTol);

struct SpectralDecomposition {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column k pairs with eigenvalues(k)
};

/// Symmetric eigendecomposition, eigenvalues ascending.
/// Throws NumericalError if the solver does not converge.
SpectralDecomposition spectral_decompose(const Matrix& symmetric);
SpectralDecomposition spectral_decompose(const Laplacian& l);

/// x^T L x.
double smoothness(const Vector& x, const Laplacian& l);

enum class KernelKind { Smooth, Heat };

/// Graph filter defining the per-cluster covariance g^2(L).
class KernelSpec {
 public:
  static KernelSpec smooth() { return KernelSpec(KernelKind::Smooth, 0.0); }
  /// Throws std::invalid_argument unless tau > 0.
  static KernelSpec heat(double tau);

  KernelKind kind() const { return kind_; }
  double tau() const { return tau_; }
  std::string name() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelSpec(KernelKind kind, double tau) : kind_(kind), tau_(tau) {}
  KernelKind kind_ = KernelKind::Smooth;
  double tau_ = 0.0;
};

/// Heat: exp(-2 tau L). Smooth: pseudo-inverse of L.
Matrix kernel_covariance(const Laplacian& l, const KernelSpec& kernel);
Matrix pseudo_inverse(const SpectralDecomposition& eig);

/// True iff the second-smallest eigenvalue exceeds `tol`.
bool is_connected(const Laplacian& l, double tol = 1e-9);

/// Zeroes every weight strictly below `theta`.
Graph threshold_graph(const Graph& g, double theta);

/// Symmetric boolean matrix of allowed edges with a false diagonal.
class EdgeMask {
 public:
  EdgeMask() = default;
  /// Throws std::invalid_argument if not symmetric or the diagonal is set.
  explicit EdgeMask(BoolMatrix allowed);

  static EdgeMask all(Index n);
  /// Pairs within `hops` steps of each other in `base`.
  static EdgeMask within_hops(const Graph& base, int hops);
  /// Pixels of a rows x cols image (row-major) that are within `hops`
  /// 4-neighbour steps of each other.
  static EdgeMask grid(Index rows, Index cols, int hops);

  Index size() const { return allowed_.rows(); }
  bool allowed(Index i, Index j) const { return allowed_(i, j); }
  const BoolMatrix& matrix() const { return allowed_; }

 private:
  BoolMatrix allowed_;
};

}  // namespace glmm
