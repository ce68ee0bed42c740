#pragma once

#include "glmm/em.hpp"
#include "glmm/graph.hpp"
#include "glmm/sampling.hpp"

#include <string>
#include <vector>

namespace glmm {

/// estimated_for_true[j] is the estimated cluster matched to true cluster j.
class ClusterAlignment {
 public:
  explicit ClusterAlignment(std::vector<Index> estimated_for_true);
  static ClusterAlignment identity(Index k);

  Index k() const { return static_cast<Index>(map_.size()); }
  Index estimated_for(Index true_cluster) const { return map_[static_cast<std::size_t>(true_cluster)]; }
  const std::vector<Index>& mapping() const { return map_; }
  /// Columns of `gamma` reordered so column j is the match of true cluster j.
  Matrix apply(const Matrix& gamma) const;

  bool operator==(const ClusterAlignment&) const = default;

 private:
  std::vector<Index> map_;
};

/// Permutation minimising ||z - gamma P||_F^2. Exhaustive for K <= 8,
/// Hungarian algorithm above.
ClusterAlignment align_clusters(const Matrix& gamma, const Matrix& z);

/// Minimum-cost perfect matching on a square cost matrix; result[row] = column.
std::vector<Index> solve_assignment(const Matrix& cost);

/// 100 / (2M) * ||z - gamma P||_F^2 after alignment.
double clustering_nmse(const Matrix& gamma, const Matrix& z);
double clustering_nmse(const Matrix& gamma, const Matrix& z, const ClusterAlignment& alignment);

/// Default support threshold for learned graphs: 1e-4 times the largest weight.
double default_edge_threshold(const Graph& learned);

/// F-measure of the learned support {W_ij >= threshold} against the support
/// of `truth`. Both empty gives 1.
double edge_f_measure(const Graph& learned, const Graph& truth, double threshold);
double edge_f_measure(const Graph& learned, const Graph& truth);

/// Mean NMSE over ordered pairs of daily hard labelings, each pair aligned
/// separately.
double consistency_nmse(const std::vector<Labels>& days);

struct MetricReport {
  std::optional<double> clustering_nmse_percent;
  std::vector<double> per_graph_f;
  std::optional<ClusterAlignment> alignment;

  double mean_f() const;
  std::string to_json() const;
  /// Header and one row; absent values are empty fields.
  static std::string csv_header();
  std::string to_csv_row() const;
};

/// Aligns by labels (when given) and scores every learned graph against the
/// truth graph it is matched to. Without labels the alignment is chosen to
/// maximise the mean F.
MetricReport evaluate(const Matrix& gamma, const std::vector<Graph>& learned, const std::optional<Labels>& labels,
                      const std::vector<Graph>& truth);

}  // namespace glmm
