#ifndef KRONSKETCH_VERIFY_HPP
#define KRONSKETCH_VERIFY_HPP

// Empirical checks of the structural properties behind l1 recovery from
// tensor-product sketches: weak distributed expansion of G1 (x) G2, the
// l1 restricted isometry of X -> A X A^T, the nullspace property, and the
// non-identifiability of the arrow pattern.

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"
#include "kronsketch/operator.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace kronsketch {

class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExpansionReport {
  long neighborhood_size = 0;      // |N(Omega)|
  double bound = 0.0;              // p * delta^2 * (1 - eps)
  int max_collision_outside = 0;   // max_{(i,i') not in Omega} |N(i,i') & N(Omega)|
  int max_collision_inside = 0;    // max_{(i,i') in Omega} |N(i,i') & N(Omega \ (i,i'))|
  double collision_bound = 0.0;    // eps * delta^2
  double eps = 0.0;
  bool part1 = false;
  bool part2 = false;
  bool part3 = false;

  bool passed() const { return part1 && part2 && part3; }
};

// Counts are taken over deduplicated tensor neighborhoods. A coverage count
// per right pair (j, j') over Omega gives all three quantities: a pair is in
// N(Omega \ (i,i')) exactly when some other cell of Omega also covers it.
inline ExpansionReport check_expansion(const TensorGraph& tg, const Support& omega,
                                       double eps, bool allow_large = false) {
  // eps = 1/4 is admitted as the supremum of the admissible range.
  require(eps > 0.0 && eps <= 0.25, "check_expansion: eps must lie in (0, 1/4]");
  require_dims(omega.p() == tg.p(), "check_expansion: dimension mismatch");
  require(allow_large || tg.p() <= 300,
          "check_expansion: p > 300 needs an explicit override");
  const int p = tg.p();
  const int m = tg.m();
  const double delta_sq =
      static_cast<double>(tg.g1().delta()) * static_cast<double>(tg.g2().delta());

  std::vector<int> cover(static_cast<std::size_t>(m) * m, 0);
  for (auto [i, ip] : omega.cells())
    for (int j : tg.g1().neighbors(i))
      for (int jp : tg.g2().neighbors(ip)) ++cover[tg.encode(j, jp)];

  ExpansionReport rep;
  rep.eps = eps;
  rep.bound = p * delta_sq * (1.0 - eps);
  rep.collision_bound = eps * delta_sq;
  rep.neighborhood_size =
      static_cast<long>(std::count_if(cover.begin(), cover.end(), [](int c) { return c > 0; }));

  for (int i = 0; i < p; ++i) {
    for (int ip = 0; ip < p; ++ip) {
      const bool inside = omega.contains(i, ip);
      // Own contribution is exactly one per pair since neighborhoods are sets.
      const int threshold = inside ? 2 : 1;
      int hits = 0;
      for (int j : tg.g1().neighbors(i))
        for (int jp : tg.g2().neighbors(ip))
          if (cover[tg.encode(j, jp)] >= threshold) ++hits;
      if (inside)
        rep.max_collision_inside = std::max(rep.max_collision_inside, hits);
      else
        rep.max_collision_outside = std::max(rep.max_collision_outside, hits);
    }
  }
  rep.part1 = rep.neighborhood_size >= rep.bound;
  rep.part2 = rep.max_collision_outside <= rep.collision_bound;
  rep.part3 = rep.max_collision_inside <= rep.collision_bound;
  return rep;
}

struct RipReport {
  double ratio = 0.0;  // ||A X A^T||_1 / (delta^2 ||X||_1)
  double eps = 0.0;
  bool lower_ok = false;  // ratio >= 1 - 2 eps
  bool upper_ok = false;  // ratio <= 1 (+1e-12 slack); deterministic
};

// delta^2 is taken as the induced l1 norm of A (x) A, which equals delta^2
// for a delta-left-regular multigraph.
inline RipReport check_rip1(const SketchOperator& op, const Matrix& x, double eps) {
  require(op.shared(), "check_rip1: operator must use B = A");
  const double x_l1 = l1_norm(x);
  require(x_l1 > 0.0, "check_rip1: X must be nonzero");
  RipReport rep;
  rep.eps = eps;
  rep.ratio = l1_norm(op.forward(x)) / (op.l1_operator_norm() * x_l1);
  rep.lower_ok = rep.ratio >= 1.0 - 2.0 * eps;
  rep.upper_ok = rep.ratio <= 1.0 + 1e-12;
  return rep;
}

inline double support_mass_ratio(const Matrix& v, const Support& omega) {
  double in = 0.0;
  for (auto [r, c] : omega.cells()) in += std::abs(v(r, c));
  const double out = l1_norm(v) - in;
  if (in == 0.0) return 0.0;
  return out > 0.0 ? in / out : std::numeric_limits<double>::infinity();
}

struct NullspaceReport {
  double max_ratio = 0.0;          // max sampled ||V_Omega||_1 / ||V_Omega^c||_1
  int samples = 0;
  long kernel_dimension = 0;
  double max_projection_residual = 0.0;
  bool dense = false;              // kernel basis from the materialized operator
};

// Samples kernel elements of X -> A X B^T and reports the largest mass ratio
// on Omega. Up to `dense_max_p` the kernel basis comes from an SVD of the
// materialized B (x) A and samples are random combinations of that basis;
// beyond it, Gaussian matrices are projected onto the kernel.
inline NullspaceReport check_nullspace(const SketchOperator& op, const Support& omega,
                                       int n_samples, std::uint64_t seed,
                                       Eigen::Index dense_max_p = 6) {
  require(n_samples >= 1, "check_nullspace: need at least one sample");
  require_dims(op.square() && omega.p() == op.p1(),
               "check_nullspace: support and operator dimensions disagree");
  NullspaceReport rep;
  rep.samples = n_samples;
  Rng rng(seed);
  const Eigen::Index p = op.p1();

  if (p <= dense_max_p) {
    rep.dense = true;
    const Matrix k = op.kron_materialize();
    Eigen::JacobiSVD<Matrix> svd(k, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cutoff = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > cutoff) ++rank;
    const Matrix basis = svd.matrixV().rightCols(k.cols() - rank);
    rep.kernel_dimension = basis.cols();
    if (basis.cols() == 0) return rep;
    for (int s = 0; s < n_samples; ++s) {
      const Vector coeff = gaussian_matrix(basis.cols(), 1, rng);
      const Matrix v = unvec(basis * coeff, p, p);
      rep.max_projection_residual = std::max(
          rep.max_projection_residual, op.forward(v).norm() / std::max(1e-300, v.norm()));
      rep.max_ratio = std::max(rep.max_ratio, support_mass_ratio(v, omega));
    }
  } else {
    const GramPseudoInverse gram(op);
    rep.kernel_dimension = p * p - gram.rank();
    if (rep.kernel_dimension == 0) return rep;
    for (int s = 0; s < n_samples; ++s) {
      Matrix v = gram.project_kernel(gaussian_matrix(p, p, rng));
      // One refinement sweep removes rounding left by the first projection.
      v = gram.project_kernel(v);
      rep.max_projection_residual = std::max(
          rep.max_projection_residual, op.forward(v).norm() / std::max(1e-300, v.norm()));
      rep.max_ratio = std::max(rep.max_ratio, support_mass_ratio(v, omega));
    }
  }
  if (rep.max_projection_residual > 1e-8)
    throw VerificationError("check_nullspace: kernel projection residual " +
                            std::to_string(rep.max_projection_residual) +
                            " exceeds 1e-8");
  return rep;
}

struct ArrowWitness {
  Matrix x;        // arrow matrix
  Matrix x_tilde;  // x with a kernel vector of A added to its first column
  double sketch_residual = 0.0;  // ||A X B^T - A X~ B^T||_F / max(1, ||A X B^T||_F)
};

// Two distinct arrow matrices with the same sketch, built from a unit
// l-infinity kernel vector of A.
inline ArrowWitness arrow_ambiguity_witness(const SketchOperator& op,
                                            std::uint64_t seed) {
  require_dims(op.square(), "arrow_ambiguity_witness: operator must be square");
  const Eigen::Index p = op.p1();
  Eigen::JacobiSVD<Matrix> svd(op.a(), Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  if (rank >= p)
    throw VerificationError("arrow_ambiguity_witness: ker(A) is trivial");

  Rng rng(seed);
  const Matrix kernel = svd.matrixV().rightCols(p - rank);
  Vector v = kernel * gaussian_matrix(kernel.cols(), 1, rng);
  v /= v.cwiseAbs().maxCoeff();
  const double kernel_residual = (op.a() * v).norm();
  if (kernel_residual > 1e-10)
    throw VerificationError("arrow_ambiguity_witness: kernel extraction residual " +
                            std::to_string(kernel_residual));

  ArrowWitness w;
  w.x = arrow_matrix(static_cast<int>(p), rng);
  w.x_tilde = w.x;
  w.x_tilde.col(0) += v;
  const Matrix y = op.forward(w.x);
  w.sketch_residual = (y - op.forward(w.x_tilde)).norm() / std::max(1.0, y.norm());
  if (w.sketch_residual > 1e-10)
    throw VerificationError("arrow_ambiguity_witness: sketches differ by " +
                            std::to_string(w.sketch_residual));
  return w;
}

}  // namespace kronsketch

#endif  // KRONSKETCH_VERIFY_HPP
