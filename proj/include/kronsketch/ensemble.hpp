#ifndef KRONSKETCH_ENSEMBLE_HPP
#define KRONSKETCH_ENSEMBLE_HPP

// Random ensembles: delta-left-regular bipartite graphs, d-distributed
// supports and matrices, Bernoulli matrices, plus the set arithmetic on
// neighborhoods that the verifiers build on.

#include "kronsketch/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kronsketch {

// A bipartite graph ([p], [m], E) in which every left vertex has exactly
// `delta` edge slots. Slots are drawn with replacement, so a left vertex may
// point at the same right vertex more than once; the adjacency entry then
// holds the multiplicity. Indices are 0-based.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  BipartiteGraph(int p, int m, int delta, std::vector<std::vector<int>> slots)
      : p_(p), m_(m), delta_(delta), slots_(std::move(slots)) {
    require(p >= 1 && m >= 1 && delta >= 1,
            "BipartiteGraph: p, m, delta must be positive");
    require(static_cast<int>(slots_.size()) == p,
            "BipartiteGraph: need one slot list per left vertex");
    neighbors_.resize(p_);
    for (int i = 0; i < p_; ++i) {
      require(static_cast<int>(slots_[i].size()) == delta_,
              "BipartiteGraph: left vertex " + std::to_string(i) +
                  " does not have exactly delta slots");
      for (int j : slots_[i])
        require(j >= 0 && j < m_, "BipartiteGraph: right vertex out of range");
      auto nb = slots_[i];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      neighbors_[i] = std::move(nb);
    }
  }

  int p() const { return p_; }
  int m() const { return m_; }
  int delta() const { return delta_; }

  // Raw edge slots of left vertex i, in draw order (may repeat).
  std::span<const int> slots(int i) const { return slots_.at(i); }

  // Deduplicated, sorted neighborhood of a single left vertex.
  std::span<const int> neighbors(int i) const { return neighbors_.at(i); }

  // m x p matrix of edge multiplicities; clip_binary caps entries at 1.
  Matrix adjacency(bool clip_binary = false) const {
    Matrix a = Matrix::Zero(m_, p_);
    for (int i = 0; i < p_; ++i)
      for (int j : slots_[i]) a(j, i) += 1.0;
    if (clip_binary) a = a.cwiseMin(1.0);
    return a;
  }

  bool operator==(const BipartiteGraph& other) const {
    return p_ == other.p_ && m_ == other.m_ && delta_ == other.delta_ &&
           slots_ == other.slots_;
  }

 private:
  int p_ = 0;
  int m_ = 0;
  int delta_ = 0;
  std::vector<std::vector<int>> slots_;
  std::vector<std::vector<int>> neighbors_;
};

inline BipartiteGraph gen_left_regular(int p, int m, int delta,
                                       std::uint64_t seed) {
  require(p >= 1 && m >= 1 && delta >= 1,
          "gen_left_regular: p, m, delta must be >= 1");
  require(static_cast<long long>(delta) <= 10LL * m,
          "gen_left_regular: delta > 10*m is a degenerate request");
  Rng rng(seed);
  std::vector<std::vector<int>> slots(p, std::vector<int>(delta));
  for (auto& row : slots)
    for (int& j : row) j = static_cast<int>(rng.below(m));
  return BipartiteGraph(p, m, delta, std::move(slots));
}

// delta = max(2, ceil(ln p)).
inline int default_delta(int p) {
  return std::max(2, static_cast<int>(std::ceil(std::log(static_cast<double>(p)))));
}

// N(S) for a set of left vertices, deduplicated and sorted.
inline std::vector<int> neighbors(const BipartiteGraph& g,
                                  std::span<const int> left) {
  std::vector<char> hit(g.m(), 0);
  for (int i : left) {
    require(i >= 0 && i < g.p(), "neighbors: left vertex out of range");
    for (int j : g.neighbors(i)) hit[j] = 1;
  }
  std::vector<int> out;
  for (int j = 0; j < g.m(); ++j)
    if (hit[j]) out.push_back(j);
  return out;
}

// Cells of [p] x [p] with row/column bookkeeping.
class Support {
 public:
  Support() = default;
  explicit Support(int p)
      : p_(p), mask_(static_cast<size_t>(p) * p, 0), row_counts_(p, 0),
        col_counts_(p, 0) {
    require(p >= 1, "Support: p must be positive");
  }

  static Support diagonal(int p) {
    Support s(p);
    for (int i = 0; i < p; ++i) s.insert(i, i);
    return s;
  }

  static Support full(int p) {
    Support s(p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < p; ++i) s.insert(i, j);
    return s;
  }

  int p() const { return p_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  bool contains(int row, int col) const {
    return mask_[index(row, col)] != 0;
  }

  // Returns false if the cell was already present.
  bool insert(int row, int col) {
    require(row >= 0 && row < p_ && col >= 0 && col < p_,
            "Support::insert: cell out of range");
    auto& slot = mask_[index(row, col)];
    if (slot) return false;
    slot = 1;
    cells_.emplace_back(row, col);
    ++row_counts_[row];
    ++col_counts_[col];
    return true;
  }

  const std::vector<std::pair<int, int>>& cells() const { return cells_; }
  const std::vector<int>& row_counts() const { return row_counts_; }
  const std::vector<int>& col_counts() const { return col_counts_; }

  int max_degree() const {
    int d = 0;
    for (int c : row_counts_) d = std::max(d, c);
    for (int c : col_counts_) d = std::max(d, c);
    return d;
  }

  bool has_diagonal() const {
    for (int i = 0; i < p_; ++i)
      if (!contains(i, i)) return false;
    return true;
  }

  bool is_distributed(int d) const { return max_degree() <= d && has_diagonal(); }

  bool is_symmetric() const {
    for (auto [r, c] : cells_)
      if (!contains(c, r)) return false;
    return true;
  }

  // Support with cell (row, col) removed.
  Support without(int row, int col) const {
    Support s(p_);
    for (auto [r, c] : cells_)
      if (r != row || c != col) s.insert(r, c);
    return s;
  }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(col) * p_ + row;
  }

  int p_ = 0;
  std::vector<char> mask_;
  std::vector<std::pair<int, int>> cells_;
  std::vector<int> row_counts_;
  std::vector<int> col_counts_;
};

// Diagonal plus off-diagonal cells drawn by rejection sampling until every
// row and column holds d cells, or until 100*p*d attempts have been spent.
// With `symmetric`, cells are added in mirrored pairs.
inline Support gen_distributed_support(int p, int d, std::uint64_t seed,
                                       bool symmetric = false) {
  require(p >= 1, "gen_distributed_support: p must be positive");
  require(d >= 1 && d <= p, "gen_distributed_support: need 1 <= d <= p");
  Support s = Support::diagonal(p);
  Rng rng(seed);
  const long long budget = 100LL * p * d;
  std::vector<int> open_rows, open_cols;
  for (long long attempt = 0; attempt < budget; ++attempt) {
    open_rows.clear();
    open_cols.clear();
    for (int k = 0; k < p; ++k) {
      if (s.row_counts()[k] < d) open_rows.push_back(k);
      if (s.col_counts()[k] < d) open_cols.push_back(k);
    }
    if (open_rows.empty() || open_cols.empty()) break;
    const int i = open_rows[rng.below(open_rows.size())];
    const int j = open_cols[rng.below(open_cols.size())];
    if (i == j || s.contains(i, j)) continue;
    if (symmetric) {
      if (s.row_counts()[j] >= d || s.col_counts()[i] >= d) continue;
      s.insert(i, j);
      s.insert(j, i);
    } else {
      s.insert(i, j);
    }
  }
  return s;
}

struct ValueSpec {
  enum class Kind { Unit, Uniform, Gaussian };
  Kind kind = Kind::Gaussian;
  double a = 0.0;  // uniform lower bound, or gaussian mean
  double b = 1.0;  // uniform upper bound, or gaussian stddev

  static ValueSpec unit() { return {Kind::Unit, 1.0, 1.0}; }
  static ValueSpec uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static ValueSpec gaussian(double mean = 0.0, double stddev = 1.0) {
    return {Kind::Gaussian, mean, stddev};
  }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::Unit: return 1.0;
      case Kind::Uniform: return rng.uniform(a, b);
      case Kind::Gaussian: return rng.gaussian(a, b);
    }
    return 0.0;
  }

  // Accepts "unit", "uniform(a,b)", "gaussian(mu,sigma)".
  static ValueSpec parse(const std::string& text) {
    if (text == "unit") return unit();
    auto args = [&](const std::string& prefix) {
      const std::string body = text.substr(prefix.size() + 1,
                                           text.size() - prefix.size() - 2);
      const auto comma = body.find(',');
      require(comma != std::string::npos, "ValueSpec: expected two arguments");
      return std::pair{std::stod(body.substr(0, comma)),
                       std::stod(body.substr(comma + 1))};
    };
    auto starts = [&](const std::string& prefix) {
      return text.rfind(prefix + "(", 0) == 0 && text.back() == ')';
    };
    try {
      if (starts("uniform")) {
        auto [lo, hi] = args("uniform");
        require(lo < hi, "ValueSpec: uniform needs a < b");
        return uniform(lo, hi);
      }
      if (starts("gaussian")) {
        auto [mu, sigma] = args("gaussian");
        require(sigma > 0, "ValueSpec: gaussian needs sigma > 0");
        return gaussian(mu, sigma);
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ParameterError*>(&e)) throw;
      throw ParameterError("ValueSpec: cannot parse '" + text + "'");
    }
    throw ParameterError("ValueSpec: unknown value distribution '" + text + "'");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::Unit: return "unit";
      case Kind::Uniform: return "uniform(" + fmt(a) + "," + fmt(b) + ")";
      case Kind::Gaussian: return "gaussian(" + fmt(a) + "," + fmt(b) + ")";
    }
    return "";
  }

 private:
  static std::string fmt(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

// Matrix supported exactly on `support`. Values below `floor` in magnitude
// are redrawn (and finally pushed out to +-floor). With `symmetric`, the
// support must be symmetric and X(i,j) = X(j,i).
inline Matrix gen_distributed_matrix(const Support& support,
                                     const ValueSpec& values,
                                     std::uint64_t seed,
                                     bool symmetric = false,
                                     double floor = 1e-3) {
  require(!symmetric || support.is_symmetric(),
          "gen_distributed_matrix: symmetric values need a symmetric support");
  Rng rng(seed);
  const int p = support.p();
  Matrix x = Matrix::Zero(p, p);
  auto draw = [&] {
    double v = values.draw(rng);
    for (int tries = 0; std::abs(v) < floor && tries < 64; ++tries)
      v = values.draw(rng);
    if (std::abs(v) < floor) v = v < 0 ? -floor : floor;
    return v;
  };
  for (auto [r, c] : support.cells()) {
    if (symmetric && r > c) continue;
    const double v = draw();
    x(r, c) = v;
    if (symmetric) x(c, r) = v;
  }
  return x;
}

inline Matrix gen_bernoulli_matrix(int p, double gamma, std::uint64_t seed) {
  require(p >= 1, "gen_bernoulli_matrix: p must be positive");
  require(gamma >= 0.0 && gamma <= 1.0,
          "gen_bernoulli_matrix: gamma must lie in [0,1]");
  Rng rng(seed);
  Matrix x(p, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i) x(i, j) = rng.bernoulli(gamma) ? 1.0 : 0.0;
  return x;
}

// Row/column degree bound for a Bernoulli(Delta/p) matrix that holds with
// probability at least 1 - eps: Delta * (1 + 2 ln(2p/eps) / Delta).
inline double prop1_degree_bound(double Delta, int p, double eps) {
  require(Delta > 0.0, "prop1_degree_bound: Delta must be positive");
  require(eps > 0.0 && eps < 1.0, "prop1_degree_bound: eps must lie in (0,1)");
  require(p >= 1, "prop1_degree_bound: p must be positive");
  return Delta * (1.0 + 2.0 * std::log(2.0 * p / eps) / Delta);
}

// Largest nonzero count over all rows and columns.
inline int degree_of_sparsity(const Matrix& x, double tol = kNonzeroTolerance) {
  int best = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    best = std::max(best, static_cast<int>((x.row(i).array().abs() > tol).count()));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    best = std::max(best, static_cast<int>((x.col(j).array().abs() > tol).count()));
  return best;
}

inline Support support_of(const Matrix& x, double tol = kNonzeroTolerance) {
  require_dims(x.rows() == x.cols(), "support_of: matrix must be square");
  Support s(static_cast<int>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (std::abs(x(i, j)) > tol) s.insert(static_cast<int>(i), static_cast<int>(j));
  return s;
}

// X_Omega: entries on the support kept, everything else zeroed.
inline Matrix project_support(const Matrix& x, const Support& support) {
  require_dims(x.rows() == support.p() && x.cols() == support.p(),
               "project_support: dimension mismatch");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (auto [r, c] : support.cells()) out(r, c) = x(r, c);
  return out;
}

// X with rows and columns of the first index dense plus the diagonal.
inline Matrix arrow_matrix(int p, Rng& rng) {
  Matrix x = Matrix::Zero(p, p);
  for (int k = 0; k < p; ++k) {
    x(0, k) = rng.gaussian();
    x(k, 0) = rng.gaussian();
    x(k, k) = rng.gaussian();
  }
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l < p; ++l) {
      if ((k == 0 || l == 0 || k == l) && std::abs(x(k, l)) < 1e-3)
        x(k, l) = x(k, l) < 0 ? -1e-3 : 1e-3;
    }
  }
  return x;
}

// G1 (x) G2: left vertices are pairs (i,i'), right vertices pairs (j,j'),
// encoded as j * m + j'. Neighborhoods are computed on demand.
class TensorGraph {
 public:
  TensorGraph(BipartiteGraph g1, BipartiteGraph g2)
      : g1_(std::move(g1)), g2_(std::move(g2)) {
    require_dims(g1_.p() == g2_.p() && g1_.m() == g2_.m(),
                 "TensorGraph: component graphs must share p and m");
  }
  explicit TensorGraph(const BipartiteGraph& g) : TensorGraph(g, g) {}

  const BipartiteGraph& g1() const { return g1_; }
  const BipartiteGraph& g2() const { return g2_; }
  int p() const { return g1_.p(); }
  int m() const { return g1_.m(); }

  int encode(int j, int jp) const { return j * m() + jp; }
  std::pair<int, int> decode(int code) const { return {code / m(), code % m()}; }

  // N(i, i'), deduplicated, sorted by code.
  std::vector<int> neighbors(int i, int ip) const {
    std::vector<int> out;
    for (int j : g1_.neighbors(i))
      for (int jp : g2_.neighbors(ip)) out.push_back(encode(j, jp));
    std::sort(out.begin(), out.end());
    return out;
  }

  // Explicit multi-edge list ((i,i'), (j,j')); refused above max_p.
  std::vector<std::pair<std::pair<int, int>, int>> edge_list(int max_p = 64) const {
    require(p() <= max_p, "TensorGraph::edge_list: p exceeds materialization cap");
    std::vector<std::pair<std::pair<int, int>, int>> edges;
    for (int i = 0; i < p(); ++i)
      for (int ip = 0; ip < p(); ++ip)
        for (int j : g1_.slots(i))
          for (int jp : g2_.slots(ip)) edges.push_back({{i, ip}, encode(j, jp)});
    return edges;
  }

 private:
  BipartiteGraph g1_;
  BipartiteGraph g2_;
};

// N(Omega) in the tensor graph, as sorted (j, j') pairs.
inline std::vector<std::pair<int, int>> tensor_neighbors(const TensorGraph& tg,
                                                         const Support& omega) {
  require_dims(omega.p() == tg.p(), "tensor_neighbors: dimension mismatch");
  const int m = tg.m();
  std::vector<char> hit(static_cast<size_t>(m) * m, 0);
  for (auto [i, ip] : omega.cells())
    for (int j : tg.g1().neighbors(i))
      for (int jp : tg.g2().neighbors(ip)) hit[tg.encode(j, jp)] = 1;
  std::vector<std::pair<int, int>> out;
  for (int code = 0; code < m * m; ++code)
    if (hit[code]) out.push_back(tg.decode(code));
  return out;
}

}  // namespace kronsketch

#endif  // KRONSKETCH_ENSEMBLE_HPP
