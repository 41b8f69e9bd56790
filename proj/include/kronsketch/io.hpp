#ifndef KRONSKETCH_IO_HPP
#define KRONSKETCH_IO_HPP

// Text formats. All vertex and cell indices on disk are 1-based.
//
//   graph      line 1 "p m delta", then p lines of delta right-vertex indices
//   support    one "row col" pair per line
//   matrix     CSV, one matrix row per line
//   edge list  one "u v" pair per line (self-loops allowed)
//   partition  one "vertex part" pair per line

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace kronsketch::io {

inline void write_graph(std::ostream& os, const BipartiteGraph& g) {
  os << g.p() << ' ' << g.m() << ' ' << g.delta() << '\n';
  for (int i = 0; i < g.p(); ++i) {
    const auto slots = g.slots(i);
    for (std::size_t k = 0; k < slots.size(); ++k)
      os << (k ? " " : "") << slots[k] + 1;
    os << '\n';
  }
}

inline BipartiteGraph read_graph(std::istream& is) {
  int p = 0, m = 0, delta = 0;
  if (!(is >> p >> m >> delta)) throw ParameterError("read_graph: missing header");
  std::vector<std::vector<int>> slots(std::max(p, 0), std::vector<int>(std::max(delta, 0)));
  for (auto& row : slots)
    for (int& j : row) {
      if (!(is >> j)) throw ParameterError("read_graph: truncated edge list");
      --j;
    }
  return BipartiteGraph(p, m, delta, std::move(slots));
}

inline void write_support(std::ostream& os, const Support& s) {
  for (auto [r, c] : s.cells()) os << r + 1 << ' ' << c + 1 << '\n';
}

inline Support read_support(std::istream& is, int p) {
  Support s(p);
  int r = 0, c = 0;
  while (is >> r >> c) s.insert(r - 1, c - 1);
  return s;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& x) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) os << (j ? "," : "") << x(i, j);
    os << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParameterError("read_matrix_csv: bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParameterError("read_matrix_csv: ragged rows");
    rows.push_back(std::move(row));
  }
  Matrix x(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  return x;
}

// Symmetric 0/1 adjacency from an edge list; p is the largest vertex seen
// unless given.
inline Matrix read_edge_list(std::istream& is, int p = 0) {
  std::vector<std::pair<int, int>> edges;
  int u = 0, v = 0, top = p;
  while (is >> u >> v) {
    if (u < 1 || v < 1) throw ParameterError("read_edge_list: vertices are 1-based");
    edges.emplace_back(u - 1, v - 1);
    top = std::max({top, u, v});
  }
  if (p > 0 && top > p) throw ParameterError("read_edge_list: vertex exceeds p");
  Matrix x = Matrix::Zero(top, top);
  for (auto [a, b] : edges) x(a, b) = x(b, a) = 1.0;
  return x;
}

inline std::vector<std::vector<int>> read_partition(std::istream& is) {
  std::vector<std::vector<int>> parts;
  int vertex = 0, part = 0;
  while (is >> vertex >> part) {
    if (vertex < 1 || part < 1) throw ParameterError("read_partition: indices are 1-based");
    if (static_cast<int>(parts.size()) < part) parts.resize(part);
    parts[part - 1].push_back(vertex - 1);
  }
  return parts;
}

inline void write_partition(std::ostream& os, const std::vector<std::vector<int>>& parts) {
  for (std::size_t k = 0; k < parts.size(); ++k)
    for (int v : parts[k]) os << v + 1 << ' ' << k + 1 << '\n';
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open " + path.string());
  return is;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot write " + path.string());
  return os;
}

}  // namespace kronsketch::io

#endif  // KRONSKETCH_IO_HPP
