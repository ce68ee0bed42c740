#include "glmm/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace glmm {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
  }
  return rows;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buffer, ptr);
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      std::ostringstream os;
      os << path.string() << ":" << r + 1 << ": expected " << cols << " columns, got " << rows[r].size();
      throw std::runtime_error(os.str());
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v;
      if (!parse_double(rows[r][c], v)) {
        std::ostringstream os;
        os << path.string() << ":" << r + 1 << ": cannot parse '" << rows[r][c] << "'";
        throw std::runtime_error(os.str());
      }
      m(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_output(path);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

Graph read_graph_dense(const std::filesystem::path& path) { return Graph::symmetrized(read_csv_matrix(path)); }

void write_graph_dense(const std::filesystem::path& path, const Graph& g) { write_csv_matrix(path, g.weights()); }

Graph read_graph_edges(const std::filesystem::path& path, Index n) {
  auto rows = read_rows(path);
  Matrix w = Matrix::Zero(n, n);
  std::size_t first = 0;
  if (!rows.empty()) {
    double probe;
    if (!parse_double(rows.front().front(), probe)) first = 1;  // header
  }
  for (std::size_t r = first; r < rows.size(); ++r) {
    double fi, fj, weight;
    if (rows[r].size() != 3 || !parse_double(rows[r][0], fi) || !parse_double(rows[r][1], fj) ||
        !parse_double(rows[r][2], weight)) {
      std::ostringstream os;
      os << path.string() << ":" << r + 1 << ": expected 'i,j,weight'";
      throw std::runtime_error(os.str());
    }
    const auto i = static_cast<Index>(fi);
    const auto j = static_cast<Index>(fj);
    if (i < 0 || j < 0 || i >= n || j >= n || i == j || static_cast<double>(i) != fi ||
        static_cast<double>(j) != fj) {
      std::ostringstream os;
      os << path.string() << ":" << r + 1 << ": invalid vertex pair (" << rows[r][0] << "," << rows[r][1] << ")";
      throw std::runtime_error(os.str());
    }
    w(i, j) += weight;
    w(j, i) += weight;
  }
  return Graph::symmetrized(w);
}

void write_graph_edges(const std::filesystem::path& path, const Graph& g) {
  auto out = open_output(path);
  out << "i,j,weight\n";
  for (Index i = 0; i < g.size(); ++i)
    for (Index j = i + 1; j < g.size(); ++j)
      if (g.weight(i, j) > 0.0) out << i << ',' << j << ',' << format_double(g.weight(i, j)) << '\n';
}

Graph read_graph(const std::filesystem::path& path, Index n_hint) {
  const auto rows = read_rows(path);
  double probe;
  const bool has_header = !rows.empty() && !parse_double(rows.front().front(), probe);
  const bool square = !has_header && !rows.empty() && rows.size() == rows.front().size();
  if (square) return read_graph_dense(path);
  if (n_hint <= 0) throw std::runtime_error(path.string() + ": edge list requires the vertex count");
  return read_graph_edges(path, n_hint);
}

EdgeMask read_edge_mask(const std::filesystem::path& path) {
  const Matrix m = read_csv_matrix(path);
  BoolMatrix allowed = m.array() != 0.0;
  return EdgeMask(std::move(allowed));
}

void write_edge_mask(const std::filesystem::path& path, const EdgeMask& mask) {
  write_csv_matrix(path, mask.matrix().cast<double>().matrix());
}

}  // namespace glmm
