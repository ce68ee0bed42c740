#pragma once

#include "glmm/graph.hpp"

#include <filesystem>
#include <string>

namespace glmm {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Header-free numeric CSV. Throws std::runtime_error on I/O or parse errors,
/// naming the file and line.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

/// Dense n x n weight matrix; symmetrized on ingestion.
Graph read_graph_dense(const std::filesystem::path& path);
void write_graph_dense(const std::filesystem::path& path, const Graph& g);

/// Edge list with columns i, j, weight (0-based, each undirected edge once).
/// An optional "i,j,weight" header line is accepted. Repeated pairs are
/// summed before symmetrizing.
Graph read_graph_edges(const std::filesystem::path& path, Index n);
void write_graph_edges(const std::filesystem::path& path, const Graph& g);

/// Dispatches on content: three columns with a header or more rows than
/// columns parse as an edge list (n required), anything square as dense.
Graph read_graph(const std::filesystem::path& path, Index n_hint = 0);

/// Mask files are dense 0/1 CSV matrices.
EdgeMask read_edge_mask(const std::filesystem::path& path);
void write_edge_mask(const std::filesystem::path& path, const EdgeMask& mask);

}  // namespace glmm
