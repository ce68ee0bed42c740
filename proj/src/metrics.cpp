#include "glmm/metrics.hpp"

#include "glmm/graph_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace glmm {

ClusterAlignment::ClusterAlignment(std::vector<Index> estimated_for_true) : map_(std::move(estimated_for_true)) {
  std::vector<bool> seen(map_.size(), false);
  for (Index e : map_) {
    if (e < 0 || e >= static_cast<Index>(map_.size()) || seen[static_cast<std::size_t>(e)])
      throw std::invalid_argument("ClusterAlignment: not a permutation");
    seen[static_cast<std::size_t>(e)] = true;
  }
}

ClusterAlignment ClusterAlignment::identity(Index k) {
  std::vector<Index> map(static_cast<std::size_t>(k));
  std::iota(map.begin(), map.end(), Index{0});
  return ClusterAlignment(std::move(map));
}

Matrix ClusterAlignment::apply(const Matrix& gamma) const {
  if (gamma.cols() != k()) throw std::invalid_argument("ClusterAlignment::apply: cluster count mismatch");
  Matrix out(gamma.rows(), gamma.cols());
  for (Index j = 0; j < k(); ++j) out.col(j) = gamma.col(estimated_for(j));
  return out;
}

namespace {

void check_shapes(const Matrix& gamma, const Matrix& z) {
  if (gamma.rows() != z.rows() || gamma.cols() != z.cols())
    throw std::invalid_argument("alignment: responsibilities and labels differ in shape");
}

}  // namespace

std::vector<Index> solve_assignment(const Matrix& cost) {
  // Shortest augmenting path Hungarian method with potentials, 1-based.
  const Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(p[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> result(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) result[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

ClusterAlignment align_clusters(const Matrix& gamma, const Matrix& z) {
  check_shapes(gamma, z);
  const Index k = z.cols();
  // cost(j, e): squared error of matching true cluster j with estimated e.
  Matrix cost(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index e = 0; e < k; ++e) cost(j, e) = (z.col(j) - gamma.col(e)).squaredNorm();
  if (k <= 8) {
    std::vector<Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<Index> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Index j = 0; j < k; ++j) c += cost(j, perm[static_cast<std::size_t>(j)]);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return ClusterAlignment(std::move(best));
  }
  return ClusterAlignment(solve_assignment(cost));
}

double clustering_nmse(const Matrix& gamma, const Matrix& z, const ClusterAlignment& alignment) {
  check_shapes(gamma, z);
  if (z.rows() == 0) throw std::invalid_argument("clustering_nmse: no signals");
  return 100.0 * (z - alignment.apply(gamma)).squaredNorm() / (2.0 * static_cast<double>(z.rows()));
}

double clustering_nmse(const Matrix& gamma, const Matrix& z) {
  return clustering_nmse(gamma, z, align_clusters(gamma, z));
}

double default_edge_threshold(const Graph& learned) { return 1e-4 * learned.weights().maxCoeff(); }

double edge_f_measure(const Graph& learned, const Graph& truth, double threshold) {
  if (learned.size() != truth.size()) throw std::invalid_argument("edge_f_measure: graph sizes differ");
  Index found = 0, learned_count = 0, true_count = 0;
  const Index n = truth.size();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool l = learned.weight(i, j) > 0.0 && learned.weight(i, j) >= threshold;
      const bool t = truth.weight(i, j) > 0.0;
      learned_count += l;
      true_count += t;
      found += l && t;
    }
  }
  if (learned_count == 0 && true_count == 0) return 1.0;
  if (found == 0) return 0.0;
  const double precision = static_cast<double>(found) / static_cast<double>(learned_count);
  const double recall = static_cast<double>(found) / static_cast<double>(true_count);
  return 2.0 * precision * recall / (precision + recall);
}

double edge_f_measure(const Graph& learned, const Graph& truth) {
  return edge_f_measure(learned, truth, default_edge_threshold(learned));
}

double consistency_nmse(const std::vector<Labels>& days) {
  if (days.size() < 2) throw std::invalid_argument("consistency_nmse: need at least two days");
  const Index slots = days.front().size();
  Index k = 0;
  for (const auto& d : days) {
    if (d.size() != slots) throw std::invalid_argument("consistency_nmse: days have different slot counts");
    d.validate();
    k = std::max(k, d.k);
  }
  std::vector<Matrix> onehot;
  for (const auto& d : days) onehot.push_back(Labels{d.cluster, k}.one_hot());
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < days.size(); ++a)
    for (std::size_t b = 0; b < days.size(); ++b)
      if (a != b) {
        total += clustering_nmse(onehot[b], onehot[a]);
        ++pairs;
      }
  return total / static_cast<double>(pairs);
}

double MetricReport::mean_f() const {
  if (per_graph_f.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(per_graph_f.begin(), per_graph_f.end(), 0.0) / static_cast<double>(per_graph_f.size());
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["clustering_nmse_percent"] = clustering_nmse_percent ? nlohmann::ordered_json(*clustering_nmse_percent) : nullptr;
  j["per_graph_f"] = per_graph_f;
  j["mean_f"] = per_graph_f.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(mean_f());
  j["aligned_permutation"] = alignment ? nlohmann::ordered_json(alignment->mapping()) : nullptr;
  return j.dump(2) + "\n";
}

std::string MetricReport::csv_header() { return "clustering_nmse_percent,mean_f,per_graph_f,aligned_permutation"; }

std::string MetricReport::to_csv_row() const {
  std::ostringstream os;
  if (clustering_nmse_percent) os << format_double(*clustering_nmse_percent);
  os << ',';
  if (!per_graph_f.empty()) os << format_double(mean_f());
  os << ',';
  for (std::size_t i = 0; i < per_graph_f.size(); ++i) os << (i ? ";" : "") << format_double(per_graph_f[i]);
  os << ',';
  if (alignment)
    for (std::size_t i = 0; i < alignment->mapping().size(); ++i) os << (i ? ";" : "") << alignment->mapping()[i];
  return os.str();
}

MetricReport evaluate(const Matrix& gamma, const std::vector<Graph>& learned, const std::optional<Labels>& labels,
                      const std::vector<Graph>& truth) {
  MetricReport report;
  const Index k = gamma.cols();
  if (!truth.empty() && static_cast<Index>(truth.size()) != k)
    throw std::invalid_argument("evaluate: number of truth graphs differs from cluster count");
  if (!learned.empty() && static_cast<Index>(learned.size()) != k)
    throw std::invalid_argument("evaluate: number of learned graphs differs from cluster count");
  if (labels) {
    if (labels->size() != gamma.rows()) throw std::invalid_argument("evaluate: label count differs from signal count");
    const Matrix z = Labels{labels->cluster, k}.one_hot();
    report.alignment = align_clusters(gamma, z);
    report.clustering_nmse_percent = clustering_nmse(gamma, z, *report.alignment);
  } else if (!truth.empty() && !learned.empty()) {
    Matrix cost(k, k);
    for (Index j = 0; j < k; ++j)
      for (Index e = 0; e < k; ++e)
        cost(j, e) = -edge_f_measure(learned[static_cast<std::size_t>(e)], truth[static_cast<std::size_t>(j)]);
    report.alignment = ClusterAlignment(solve_assignment(cost));
  }
  if (!truth.empty() && !learned.empty()) {
    const ClusterAlignment align = report.alignment ? *report.alignment : ClusterAlignment::identity(k);
    for (Index j = 0; j < k; ++j)
      report.per_graph_f.push_back(
          edge_f_measure(learned[static_cast<std::size_t>(align.estimated_for(j))], truth[static_cast<std::size_t>(j)]));
  }
  return report;
}

}  // namespace glmm
