#ifndef KRONSKETCH_PIPELINES_HPP
#define KRONSKETCH_PIPELINES_HPP

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"
#include "kronsketch/operator.hpp"
#include "kronsketch/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace kronsketch {

// ---------------------------------------------------------------------------
// Covariance sketching

// Symmetric d-distributed covariance with a diagonal of d * max|offdiag| + 1,
// which makes it strictly diagonally dominant and hence positive definite.
inline Matrix planted_covariance(int p, int d, const ValueSpec& values,
                                 std::uint64_t seed) {
  const Support support = gen_distributed_support(p, d, derive_seed(seed, 1), true);
  Matrix sigma = gen_distributed_matrix(support, values, derive_seed(seed, 2), true);
  double max_off = 0.0;
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i)
      if (i != j) max_off = std::max(max_off, std::abs(sigma(i, j)));
  sigma.diagonal().setConstant(d * max_off + 1.0);
  return sigma;
}

// Symmetric square root via the eigendecomposition; negative eigenvalues
// from rounding are clamped to zero.
inline Matrix symmetric_sqrt(const Matrix& s) {
  require_dims(s.rows() == s.cols(), "symmetric_sqrt: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Seeded source of i.i.d. zero-mean Gaussian p-vectors with covariance Sigma.
class SampleStream {
 public:
  SampleStream(Matrix sigma, int n, std::uint64_t seed)
      : sigma_(std::move(sigma)), factor_(symmetric_sqrt(sigma_)), n_(n),
        seed_(seed), rng_(seed) {
    require(n >= 1, "SampleStream: need at least one sample");
  }

  int p() const { return static_cast<int>(sigma_.rows()); }
  int n() const { return n_; }
  const Matrix& sigma() const { return sigma_; }

  bool has_next() const { return drawn_ < n_; }

  Vector next() {
    require(has_next(), "SampleStream: stream exhausted");
    ++drawn_;
    return factor_ * gaussian_matrix(p(), 1, rng_);
  }

  void reset() {
    rng_ = Rng(seed_);
    drawn_ = 0;
  }

 private:
  Matrix sigma_;
  Matrix factor_;
  int n_;
  std::uint64_t seed_;
  Rng rng_;
  int drawn_ = 0;
};

// (1/n) sum xi xi^T, computed in the ambient dimension.
inline Matrix empirical_covariance(SampleStream& stream) {
  stream.reset();
  Matrix acc = Matrix::Zero(stream.p(), stream.p());
  while (stream.has_next()) {
    const Vector xi = stream.next();
    acc.selfadjointView<Eigen::Lower>().rankUpdate(xi);
  }
  acc = acc.selfadjointView<Eigen::Lower>();
  return acc / stream.n();
}

// Per-fold sketch-domain second moments; fold f holds samples with index
// congruent to f modulo the fold count.
struct FoldedSketch {
  std::vector<Matrix> sums;
  std::vector<int> counts;

  Matrix mean() const {
    Matrix acc = Matrix::Zero(sums.front().rows(), sums.front().cols());
    int total = 0;
    for (std::size_t f = 0; f < sums.size(); ++f) {
      acc += sums[f];
      total += counts[f];
    }
    return acc / std::max(1, total);
  }

  Matrix fold_mean(std::size_t f) const { return sums.at(f) / std::max(1, counts.at(f)); }

  Matrix mean_excluding(std::size_t f) const {
    Matrix acc = Matrix::Zero(sums.front().rows(), sums.front().cols());
    int total = 0;
    for (std::size_t g = 0; g < sums.size(); ++g) {
      if (g == f) continue;
      acc += sums[g];
      total += counts[g];
    }
    return acc / std::max(1, total);
  }
};

// One pass over the stream: each sample is sketched to Z = A xi and only the
// m x m accumulators are kept.
inline FoldedSketch cov_sketch_folded(SampleStream& stream, const Matrix& a, int folds) {
  require_dims(a.cols() == stream.p(), "cov_sketch: A must have p columns");
  require(folds >= 1, "cov_sketch: need at least one fold");
  stream.reset();
  FoldedSketch out;
  out.sums.assign(folds, Matrix::Zero(a.rows(), a.rows()));
  out.counts.assign(folds, 0);
  int index = 0;
  while (stream.has_next()) {
    const Vector z = a * stream.next();
    const int f = index++ % folds;
    out.sums[f].noalias() += z * z.transpose();
    ++out.counts[f];
  }
  return out;
}

inline Matrix cov_sketch(SampleStream& stream, const Matrix& a) {
  return cov_sketch_folded(stream, a, 1).mean();
}

struct RecoveryMode {
  enum class Kind { Exact, Constrained };
  Kind kind = Kind::Exact;
  double kappa = 0.0;

  static RecoveryMode exact() { return {}; }
  static RecoveryMode constrained(double kappa) { return {Kind::Constrained, kappa}; }
};

inline RecoveryResult recover_covariance(const Matrix& a, const Matrix& sigma_z,
                                         RecoveryMode mode = RecoveryMode::exact(),
                                         const SolverOptions& opts = {}) {
  require_dims(sigma_z.rows() == a.rows() && sigma_z.cols() == a.rows(),
               "recover_covariance: sketch must be m x m");
  const double asym = linf_norm(sigma_z - sigma_z.transpose());
  require(asym <= 1e-8 * std::max(1.0, linf_norm(sigma_z)),
          "recover_covariance: sketched covariance is not symmetric");
  const Matrix sym = 0.5 * (sigma_z + sigma_z.transpose());
  const SketchOperator op(a);
  if (mode.kind == RecoveryMode::Kind::Exact) return solve_p1(op, sym, opts);
  return solve_constrained(op, sym, mode.kappa, opts);
}

inline RecoveryResult cross_cov_recover(const Matrix& a, const Matrix& b,
                                        const Matrix& sigma_zw,
                                        const SolverOptions& opts = {}) {
  require_dims(a.rows() == b.rows() && sigma_zw.rows() == a.rows() &&
                   sigma_zw.cols() == b.rows(),
               "cross_cov_recover: dimension mismatch");
  return solve_p1(SketchOperator(a, b), sigma_zw, opts);
}

struct KappaSelection {
  double factor = 0.0;                  // chosen multiple of ||Y||_F
  double kappa = 0.0;                   // kappa for the full-sample sketch
  std::vector<double> factors;
  std::vector<double> validation_error; // mean held-out sketch error per factor
};

// k-fold cross-validation of kappa over factors * ||Y_train||_F. The score
// of a factor is the mean Frobenius distance between A X A^T (fitted on the
// training folds) and the held-out fold's sketch. The chosen factor is
// rescaled by sqrt((k-1)/k) for the full sample, whose noise is smaller.
inline KappaSelection select_kappa_cv(const SketchOperator& op, const FoldedSketch& folds,
                                      std::vector<double> factors = {},
                                      const SolverOptions& opts = {}) {
  const std::size_t k = folds.sums.size();
  require(k >= 2, "select_kappa_cv: need at least two folds");
  if (factors.empty())
    for (int e = -8; e <= 4; ++e) factors.push_back(std::ldexp(1.0, e));
  KappaSelection sel;
  sel.factors = factors;
  sel.validation_error.assign(factors.size(), 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    const Matrix train = folds.mean_excluding(f);
    const Matrix held = folds.fold_mean(f);
    const double train_norm = train.norm();
    for (std::size_t g = 0; g < factors.size(); ++g) {
      const RecoveryResult r = solve_constrained(op, train, factors[g] * train_norm, opts);
      sel.validation_error[g] += (op.forward(r.x) - held).norm() / static_cast<double>(k);
    }
  }
  const auto best = std::min_element(sel.validation_error.begin(), sel.validation_error.end());
  sel.factor = factors[static_cast<std::size_t>(best - sel.validation_error.begin())];
  sel.kappa = sel.factor * folds.mean().norm() *
              std::sqrt(static_cast<double>(k - 1) / static_cast<double>(k));
  return sel;
}

// Relative support overlap |S1 & S2| / |S1 | S2| after zeroing entries with
// magnitude at or below `threshold`.
inline double support_jaccard(const Matrix& estimate, const Matrix& truth,
                              double threshold) {
  require_dims(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(),
               "support_jaccard: dimension mismatch");
  long both = 0, either = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j)
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      const bool a = std::abs(estimate(i, j)) > threshold;
      const bool b = std::abs(truth(i, j)) > threshold;
      both += a && b;
      either += a || b;
    }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

// End-to-end covariance experiment: plant Sigma, stream n samples through a
// delta-left-regular sketch, recover, and score against Sigma.
struct CovarianceConfig {
  int p = 40;
  int d = 4;
  int n = 2100;
  int m = 21;
  int delta = 0;  // 0 selects default_delta(p)
  std::uint64_t seed = 1;
  bool constrained = true;
  double kappa = -1.0;  // negative selects kappa by cross-validation
  std::vector<double> kappa_grid;  // empty means 2^-8 .. 2^4
  int folds = 5;
  ValueSpec values = ValueSpec::gaussian();
  double jaccard_threshold = 1e-2;
  SolverOptions solver = [] {
    SolverOptions o;
    o.max_iter = 2000;
    o.tol_residual = 1e-6;
    return o;
  }();

  void validate() const {
    require(p >= 1 && d >= 1 && d <= p && n >= 1 && m >= 1 && delta >= 0,
            "CovarianceConfig: invalid dimensions");
    require(folds >= 2, "CovarianceConfig: need at least two folds");
    require(n >= folds, "CovarianceConfig: need at least one sample per fold");
    require(jaccard_threshold >= 0.0, "CovarianceConfig: threshold must be non-negative");
    for (double f : kappa_grid) require(f > 0.0, "CovarianceConfig: kappa factors must be positive");
    solver.validate();
  }
};

struct CovarianceOutcome {
  Matrix sigma;
  Matrix sketch;
  RecoveryResult recovery;
  std::optional<KappaSelection> selection;
  double kappa = 0.0;
  double relative_l1_error = 0.0;
  double jaccard = 0.0;
};

inline CovarianceOutcome run_covariance_experiment(const CovarianceConfig& cfg) {
  cfg.validate();
  const int delta = cfg.delta > 0 ? cfg.delta : default_delta(cfg.p);
  CovarianceOutcome out;
  out.sigma = planted_covariance(cfg.p, cfg.d, cfg.values, derive_seed(cfg.seed, 0));
  const Matrix a = gen_left_regular(cfg.p, cfg.m, delta, derive_seed(cfg.seed, 1)).adjacency();
  const SketchOperator op(a);
  SampleStream stream(out.sigma, cfg.n, derive_seed(cfg.seed, 2));
  const FoldedSketch folds = cov_sketch_folded(stream, a, cfg.folds);
  out.sketch = folds.mean();
  if (!cfg.constrained) {
    out.recovery = recover_covariance(a, out.sketch, RecoveryMode::exact(), cfg.solver);
  } else {
    out.kappa = cfg.kappa;
    if (out.kappa < 0.0) {
      out.selection = select_kappa_cv(op, folds, cfg.kappa_grid, cfg.solver);
      out.kappa = out.selection->kappa;
    }
    out.recovery =
        recover_covariance(a, out.sketch, RecoveryMode::constrained(out.kappa), cfg.solver);
  }
  out.relative_l1_error = l1_norm(out.recovery.x - out.sigma) / l1_norm(out.sigma);
  out.jaccard = support_jaccard(out.recovery.x, out.sigma, cfg.jaccard_threshold);
  return out;
}

// ---------------------------------------------------------------------------
// Graph sketching

// Undirected graph on [p] (adjacency with self-loops on the diagonal) plus a
// covering family of vertex parts V_1..V_m.
class PartitionedGraph {
 public:
  PartitionedGraph(Matrix adjacency, std::vector<std::vector<int>> parts)
      : adjacency_(std::move(adjacency)), parts_(std::move(parts)) {
    require_dims(adjacency_.rows() == adjacency_.cols(),
                 "PartitionedGraph: adjacency must be square");
    require(!parts_.empty(), "PartitionedGraph: need at least one part");
    std::vector<char> covered(adjacency_.rows(), 0);
    for (const auto& part : parts_)
      for (int v : part) {
        require(v >= 0 && v < adjacency_.rows(), "PartitionedGraph: vertex out of range");
        covered[v] = 1;
      }
    for (char c : covered)
      require(c, "PartitionedGraph: every vertex must belong to some part");
  }

  int p() const { return static_cast<int>(adjacency_.rows()); }
  int m() const { return static_cast<int>(parts_.size()); }
  const Matrix& adjacency() const { return adjacency_; }
  const std::vector<std::vector<int>>& parts() const { return parts_; }

  // A_ij = 1 iff vertex j is in part i.
  Matrix indicator() const {
    Matrix a = Matrix::Zero(m(), p());
    for (int i = 0; i < m(); ++i)
      for (int v : parts_[i]) a(i, v) = 1.0;
    return a;
  }

 private:
  Matrix adjacency_;
  std::vector<std::vector<int>> parts_;
};

// Each vertex joins the distinct parts hit by its delta random draws.
inline std::vector<std::vector<int>> random_partition(int p, int m, int delta,
                                                      std::uint64_t seed) {
  const BipartiteGraph g = gen_left_regular(p, m, delta, seed);
  std::vector<std::vector<int>> parts(m);
  for (int v = 0; v < p; ++v)
    for (int part : g.neighbors(v)) parts[part].push_back(v);
  return parts;
}

// Random symmetric 0/1 adjacency with every self-loop present and at most
// `max_degree` other neighbors per vertex.
inline Matrix random_bounded_degree_graph(int p, int max_degree, std::uint64_t seed) {
  const Support s = gen_distributed_support(p, max_degree + 1, seed, true);
  return gen_distributed_matrix(s, ValueSpec::unit(), seed, true);
}

inline Matrix graph_sketch(const PartitionedGraph& pg) {
  return SketchOperator(pg.indicator()).forward(pg.adjacency());
}

struct UnsketchResult {
  RecoveryResult recovery;
  Matrix adjacency;  // recovery.x rounded at 0.5
};

inline UnsketchResult graph_unsketch(const Matrix& y, const Matrix& a,
                                     const SolverOptions& opts = {}) {
  UnsketchResult out;
  out.recovery = solve_p1(SketchOperator(a), y, opts);
  out.adjacency = out.recovery.x.unaryExpr([](double v) { return v >= 0.5 ? 1.0 : 0.0; });
  return out;
}

// ---------------------------------------------------------------------------
// Rectangular recovery

struct RectangularResult {
  Matrix x;                // p1 x p2
  RecoveryResult square;   // solution of the padded square problem
  double padding_max = 0.0;
};

// Recovers X (p1 x p2) from Y = A X B^T by padding the narrower side with
// fresh delta-left-regular columns to a p x p problem, p = max(p1, p2). The
// padded rows (or columns) of the square solution must vanish.
inline RectangularResult rectangular_recover(const Matrix& a, const Matrix& b,
                                             const Matrix& y, int delta,
                                             std::uint64_t seed,
                                             const SolverOptions& opts = {}) {
  require_dims(a.rows() == b.rows() && y.rows() == a.rows() && y.cols() == a.rows(),
               "rectangular_recover: dimension mismatch");
  require(delta >= 1, "rectangular_recover: delta must be positive");
  if (a.cols() > b.cols()) {
    // Y^T = B X^T A^T.
    RectangularResult t = rectangular_recover(b, a, y.transpose(), delta, seed, opts);
    t.x.transposeInPlace();
    return t;
  }
  const Eigen::Index p1 = a.cols(), p = b.cols();
  Matrix a_pad(a.rows(), p);
  a_pad.leftCols(p1) = a;
  // Padding columns are drawn one at a time from the ensemble and redrawn
  // (up to 64 times) while they repeat a column already present.
  Rng rng(seed);
  for (Eigen::Index c = p1; c < p; ++c) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      a_pad.col(c) =
          gen_left_regular(1, static_cast<int>(a.rows()), delta, rng.next()).adjacency().col(0);
      bool repeated = false;
      for (Eigen::Index k = 0; k < c && !repeated; ++k) repeated = a_pad.col(k) == a_pad.col(c);
      if (!repeated) break;
    }
  }

  RectangularResult out;
  out.square = solve_p1(SketchOperator(a_pad, b), y, opts);
  out.x = out.square.x.topRows(p1);
  out.padding_max = p > p1 ? linf_norm(out.square.x.bottomRows(p - p1)) : 0.0;
  if (out.padding_max > 1e-6) {
    out.square.converged = false;
    out.square.message = "padded rows of the solution are nonzero";
  }
  return out;
}

}  // namespace kronsketch

#endif  // KRONSKETCH_PIPELINES_HPP
