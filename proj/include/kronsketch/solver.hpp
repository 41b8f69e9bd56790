#ifndef KRONSKETCH_SOLVER_HPP
#define KRONSKETCH_SOLVER_HPP

// l1 recovery from a sketch Y = A X B^T:
//
//   solve_p1           minimize ||X||_1  s.t.  A X B^T = Y
//   solve_p2           minimize ||A X B^T - Y||_F^2 + lambda ||X||_1
//   solve_constrained  minimize ||X||_1  s.t.  ||A X B^T - Y||_F <= kappa
//   lp_oracle          exact simplex solution of the solve_p1 problem for
//                      tiny instances, used to validate the iterative path.

#include "kronsketch/common.hpp"
#include "kronsketch/operator.hpp"
#include "kronsketch/simplex.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace kronsketch {

struct SolverOptions {
  double tol_feas = 1e-8;      // relative feasibility tolerance
  double tol_obj = 1e-9;       // objective stagnation tolerance
  double tol_residual = 1e-8;  // relative primal/dual residual tolerance
  int max_iter = 50000;
  double rho = 1.0;            // initial ADMM penalty
  bool adaptive_rho = true;
  bool polish = true;          // least-squares refit on the detected support

  void validate() const {
    require(tol_feas > 0 && tol_obj > 0 && tol_residual > 0,
            "SolverOptions: tolerances must be positive");
    require(max_iter >= 1, "SolverOptions: max_iter must be >= 1");
    require(rho > 0, "SolverOptions: rho must be positive");
  }
};

struct RecoveryResult {
  Matrix x;
  double objective = 0.0;       // ||X||_1
  double feas_residual = 0.0;   // ||A X B^T - Y||_F / max(1, ||Y||_F)
  int iterations = 0;
  bool converged = false;
  double lambda = 0.0;          // penalty used (p2 / constrained modes)
  std::string message;
};

inline double feasibility_residual(const SketchOperator& op, const Matrix& x,
                                   const Matrix& y) {
  return (op.forward(x) - y).norm() / std::max(1.0, y.norm());
}

inline Matrix soft_threshold(const Matrix& x, double t) {
  return x.unaryExpr([t](double v) {
    return v > t ? v - t : (v < -t ? v + t : 0.0);
  });
}

namespace solver_internal {

inline void check_sketch_shape(const SketchOperator& op, const Matrix& y) {
  require_dims(y.rows() == op.m() && y.cols() == op.m(),
               "solver: Y must be m x m for the given operator");
}

struct Polished {
  bool ok = false;
  bool certified = false;  // least-squares dual certificate holds
  Matrix x;
};

// Refits X on the support of `guide` by least squares. When the support
// columns of B (x) A are independent and the refit is feasible, also checks
// the least-squares dual certificate: nu = K_S (K_S^T K_S)^{-1} sign(x_S)
// must satisfy |K^T nu| < 1 off the support, which proves optimality.
inline Polished polish(const SketchOperator& op, const Matrix& y,
                       const Matrix& guide, double tol_feas) {
  Polished out;
  const double scale = std::max(1.0, linf_norm(guide));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  for (Eigen::Index c = 0; c < guide.cols(); ++c)
    for (Eigen::Index i = 0; i < guide.rows(); ++i)
      if (std::abs(guide(i, c)) > 1e-9 * scale) cells.emplace_back(i, c);
  const Eigen::Index rows = op.m() * op.m();
  if (cells.empty()) {
    out.x = Matrix::Zero(guide.rows(), guide.cols());
    out.ok = y.norm() <= tol_feas * std::max(1.0, y.norm());
    return out;
  }
  if (static_cast<Eigen::Index>(cells.size()) > rows) return out;

  Matrix ks(rows, static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k)
    ks.col(k) = op.kron_column(cells[k].first, cells[k].second);
  Eigen::ColPivHouseholderQR<Matrix> qr(ks);
  if (qr.rank() < ks.cols()) return out;
  const Vector rhs = vec(y);
  const Vector xs = qr.solve(rhs);
  if ((ks * xs - rhs).norm() > tol_feas * std::max(1.0, rhs.norm())) return out;

  out.x = Matrix::Zero(guide.rows(), guide.cols());
  Vector sgn(xs.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    out.x(cells[k].first, cells[k].second) = xs(k);
    sgn(k) = xs(k) > 0 ? 1.0 : (xs(k) < 0 ? -1.0 : 0.0);
  }
  out.ok = true;

  // nu = K_S (K_S^T K_S)^{-1} sgn, via the QR factors of K_S.
  const Matrix r = qr.matrixR().topLeftCorner(ks.cols(), ks.cols())
                       .triangularView<Eigen::Upper>();
  const Vector perm_sgn = qr.colsPermutation().transpose() * sgn;
  const Vector w = r.transpose().triangularView<Eigen::Lower>().solve(perm_sgn);
  Vector q_w = Vector::Zero(rows);
  q_w.head(w.size()) = w;
  const Vector nu = qr.householderQ() * q_w;
  const Matrix g = op.adjoint(unvec(nu, op.m(), op.m()));
  double off = 0.0;
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      if (out.x(i, c) == 0.0) off = std::max(off, std::abs(g(i, c)));
  out.certified = off < 1.0 - 1e-9;
  return out;
}

}  // namespace solver_internal

// Basis pursuit by ADMM on  min ||Z||_1  s.t.  X = Z,  A X B^T = Y.
// The X-step is the exact projection onto the affine constraint set, applied
// through the Kronecker-factored Gram pseudo-inverse. Once the support of Z
// stops changing, a least-squares refit with a dual certificate is tried and
// ends the iteration early when it proves optimality.
inline RecoveryResult solve_p1(const SketchOperator& op, const Matrix& y,
                               const SolverOptions& opts = {}) {
  opts.validate();
  solver_internal::check_sketch_shape(op, y);
  RecoveryResult res;
  const Eigen::Index rows = op.p1(), cols = op.p2();
  if (y.cwiseAbs().maxCoeff() == 0.0) {
    res.x = Matrix::Zero(rows, cols);
    res.converged = true;
    res.message = "zero sketch";
    return res;
  }

  const GramPseudoInverse gram(op);
  const double sqrt_n = std::sqrt(static_cast<double>(rows * cols));
  const double y_scale = std::max(1.0, y.norm());
  const double tol_scale = y_scale / std::max(1.0, op.l1_operator_norm());
  double tol = opts.tol_residual;
  int refinements = 0;

  Matrix x = gram.project_affine(Matrix::Zero(rows, cols), y);
  Matrix z = x;
  Matrix u = Matrix::Zero(rows, cols);
  Matrix z_old;
  double rho = opts.rho;

  int stable_support = 0;
  bool polished_this_support = false;
  solver_internal::Polished certified;
  bool admm_converged = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    x = gram.project_affine(z - u, y);
    z_old = z;
    z = soft_threshold(x + u, 1.0 / rho);
    u += x - z;

    const double r_norm = (x - z).norm();
    const double s_norm = rho * (z - z_old).norm();
    const double eps_pri = sqrt_n * tol * tol_scale + tol * std::max(x.norm(), z.norm());
    const double eps_dual = sqrt_n * tol * tol_scale + tol * rho * u.norm();
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      // Without a certificate, tighten the tolerance twice before accepting.
      if (opts.polish) {
        auto pol = solver_internal::polish(op, y, z, opts.tol_feas);
        if (pol.ok && pol.certified) {
          certified = std::move(pol);
          ++it;
          break;
        }
      }
      if (refinements < 2) {
        ++refinements;
        tol *= 1e-2;
        continue;
      }
      admm_converged = true;
      ++it;
      break;
    }

    if (opts.polish) {
      const bool same = ((z.array() != 0.0) == (z_old.array() != 0.0)).all();
      if (same) {
        ++stable_support;
      } else {
        stable_support = 0;
        polished_this_support = false;
      }
      if (stable_support >= 50 && !polished_this_support) {
        polished_this_support = true;
        auto pol = solver_internal::polish(op, y, z, opts.tol_feas);
        if (pol.ok && pol.certified) {
          certified = std::move(pol);
          ++it;
          break;
        }
      }
    }

    if (opts.adaptive_rho && it % 10 == 9) {
      if (r_norm > 10.0 * s_norm) {
        rho *= 2.0;
        u /= 2.0;
      } else if (s_norm > 10.0 * r_norm) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  res.iterations = it;

  if (certified.ok) {
    res.x = std::move(certified.x);
    res.message = "certified by least-squares dual certificate";
  } else {
    res.x = x;
    res.message = admm_converged ? "admm residuals below tolerance"
                                 : "iteration limit reached";
    if (opts.polish) {
      auto pol = solver_internal::polish(op, y, z, opts.tol_feas);
      if (pol.ok && l1_norm(pol.x) <= l1_norm(x) + opts.tol_obj * (1.0 + l1_norm(y))) {
        res.x = std::move(pol.x);
        if (pol.certified) {
          admm_converged = true;
          res.message = "certified by least-squares dual certificate";
        }
      }
    }
  }
  res.objective = l1_norm(res.x);
  res.feas_residual = feasibility_residual(op, res.x, y);
  res.converged = (certified.ok || admm_converged) && res.feas_residual <= opts.tol_feas;
  return res;
}

// Power iteration estimate of ||A^T (A X B^T) B|| = sigma_max^2.
inline double estimate_gram_norm(const SketchOperator& op, int iterations = 30,
                                 std::uint64_t seed = 0x5eed) {
  Rng rng(seed);
  Matrix v = gaussian_matrix(op.p1(), op.p2(), rng);
  v /= v.norm();
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Matrix w = op.adjoint(op.forward(v));
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return lambda;
}

namespace solver_internal {

inline double p2_objective(const SketchOperator& op, const Matrix& x,
                           const Matrix& y, double lambda) {
  return (op.forward(x) - y).squaredNorm() + lambda * l1_norm(x);
}

}  // namespace solver_internal

// Penalized program by monotone FISTA with backtracking and adaptive
// restart. Step size starts at 1/L with L = 2 * (power-iteration estimate).
inline RecoveryResult solve_p2(const SketchOperator& op, const Matrix& y,
                               double lambda, const SolverOptions& opts = {},
                               const Matrix* warm_start = nullptr) {
  opts.validate();
  solver_internal::check_sketch_shape(op, y);
  require(lambda > 0.0, "solve_p2: lambda must be positive");
  using solver_internal::p2_objective;

  RecoveryResult res;
  res.lambda = lambda;
  Matrix x = warm_start ? *warm_start : Matrix::Zero(op.p1(), op.p2());
  require_dims(x.rows() == op.p1() && x.cols() == op.p2(),
               "solve_p2: warm start has the wrong shape");

  double lip = 2.0 * estimate_gram_norm(op) * 1.02;
  if (lip <= 0.0) lip = 1.0;
  Matrix x_prev = x;
  Matrix w = x;  // extrapolated point
  double t = 1.0;
  double f_x = p2_objective(op, x, y, lambda);
  const double grad_scale = std::max(1.0, 2.0 * linf_norm(op.adjoint(y)));

  bool converged = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const Matrix rw = op.forward(w) - y;
    const double smooth_w = rw.squaredNorm();
    const Matrix grad = 2.0 * op.adjoint(rw);
    Matrix z;
    for (int bt = 0; bt < 60; ++bt) {
      z = soft_threshold(w - grad / lip, lambda / lip);
      const Matrix d = z - w;
      const double smooth_z = (op.forward(z) - y).squaredNorm();
      if (smooth_z <= smooth_w + (grad.array() * d.array()).sum() +
                          0.5 * lip * d.squaredNorm() + 1e-12 * std::max(1.0, smooth_w))
        break;
      lip *= 2.0;
    }
    // Gradient-mapping norm at w measures stationarity.
    const double gmap = lip * (z - w).norm();

    const double f_z = p2_objective(op, z, y, lambda);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    x_prev = x;
    if (f_z <= f_x) {
      x = z;
      const double f_prev = f_x;
      f_x = f_z;
      w = x + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
      if (gmap <= opts.tol_residual * grad_scale &&
          f_prev - f_x <= opts.tol_obj * std::max(1.0, f_x)) {
        converged = true;
        ++it;
        break;
      }
    } else {
      // Restart the momentum from the last accepted iterate.
      w = x;
      t = 1.0;
    }
  }
  res.x = x;
  res.iterations = it;
  res.converged = converged;
  res.objective = l1_norm(x);
  res.feas_residual = feasibility_residual(op, x, y);
  res.message = converged ? "gradient mapping below tolerance" : "iteration limit reached";
  return res;
}

// min ||X||_1 s.t. ||A X B^T - Y||_F <= kappa, through the Lagrangian: the
// residual of the penalized solution grows with lambda, so lambda is
// bracketed in log space and refined until the residual is within 1% of
// kappa. The bracket is found by walking down from lambda_max in factors of
// four (warm-started, sparse iterates), then refined by false position on
// log(residual / kappa) (Illinois variant).
// kappa = 0 is the equality-constrained program.
inline RecoveryResult solve_constrained(const SketchOperator& op, const Matrix& y,
                                        double kappa, const SolverOptions& opts = {},
                                        int max_steps = 30) {
  require(kappa >= 0.0, "solve_constrained: kappa must be non-negative");
  solver_internal::check_sketch_shape(op, y);
  if (kappa == 0.0) return solve_p1(op, y, opts);

  const double y_norm = y.norm();
  RecoveryResult res;
  if (kappa >= y_norm) {
    res.x = Matrix::Zero(op.p1(), op.p2());
    res.feas_residual = feasibility_residual(op, res.x, y);
    res.converged = true;
    res.message = "zero matrix satisfies the constraint";
    return res;
  }

  const double lambda_max = 2.0 * linf_norm(op.adjoint(y));
  // At lambda_max the solution is zero, so the upper end is known exactly.
  double hi = std::log(lambda_max);
  double g_hi = std::log(y_norm / kappa);
  double lo = hi;
  double g_lo = 0.0;
  bool lo_known = false;
  int retained = 0;  // side kept in consecutive false-position steps

  Matrix warm = Matrix::Zero(op.p1(), op.p2());
  RecoveryResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  int total_iters = 0;
  for (int step = 0; step < max_steps; ++step) {
    double log_lambda = lo - std::log(4.0);
    if (lo_known) {
      const double t = g_hi / (g_hi - g_lo);
      log_lambda = hi - t * (hi - lo);
      log_lambda = std::clamp(log_lambda, lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
    }
    RecoveryResult r = solve_p2(op, y, std::exp(log_lambda), opts, &warm);
    total_iters += r.iterations;
    const double res_norm = (op.forward(r.x) - y).norm();
    const double gap = std::abs(res_norm - kappa);
    warm = r.x;
    if (gap < best_gap) {
      best_gap = gap;
      best = r;
    }
    if (gap <= 0.01 * kappa) break;
    const double g = std::log(std::max(res_norm, 1e-300) / kappa);
    if (g > 0) {
      hi = log_lambda;
      g_hi = g;
      if (!lo_known) lo = log_lambda;
      if (retained == -1 && lo_known) g_lo *= 0.5;
      retained = lo_known ? -1 : 0;
    } else {
      lo = log_lambda;
      g_lo = g;
      if (retained == 1) g_hi *= 0.5;
      retained = lo_known ? 1 : 0;
      lo_known = true;
    }
  }
  best.iterations = total_iters;
  best.converged = best.converged && best_gap <= 0.01 * kappa;
  best.message = best.converged ? "residual matched kappa within 1%"
                                : "bracketing did not match kappa within 1%";
  return best;
}

// Exact LP solution of min ||X||_1 s.t. A X B^T = Y on the materialized
// Kronecker system, with X = X+ - X-, X+/- >= 0.
inline RecoveryResult lp_oracle(const SketchOperator& op, const Matrix& y) {
  require(op.p1() <= 10 && op.p2() <= 10 && op.m() <= 8,
          "lp_oracle: instance exceeds the p <= 10, m <= 8 guard");
  solver_internal::check_sketch_shape(op, y);
  const Matrix k = op.kron_materialize();
  const Eigen::Index n = k.cols();
  Matrix a(k.rows(), 2 * n);
  a << k, -k;
  const Vector c = Vector::Ones(2 * n);
  const LpSolution lp = DenseSimplex().solve(a, vec(y), c);

  RecoveryResult res;
  if (lp.status != LpSolution::Status::Optimal) {
    res.x = Matrix::Zero(op.p1(), op.p2());
    res.message = lp.status == LpSolution::Status::Infeasible
                      ? "lp infeasible"
                      : "lp did not reach optimality";
    res.feas_residual = feasibility_residual(op, res.x, y);
    return res;
  }
  const Vector xv = lp.x.head(n) - lp.x.tail(n);
  res.x = unvec(xv, op.p1(), op.p2());
  res.objective = l1_norm(res.x);
  res.feas_residual = feasibility_residual(op, res.x, y);
  res.iterations = lp.pivots;
  res.converged = true;
  res.message = "simplex optimal";
  return res;
}

}  // namespace kronsketch

#endif  // KRONSKETCH_SOLVER_HPP
