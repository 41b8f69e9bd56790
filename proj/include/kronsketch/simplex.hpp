#ifndef KRONSKETCH_SIMPLEX_HPP
#define KRONSKETCH_SIMPLEX_HPP

// Dense two-phase tableau simplex for small standard-form LPs
//
//   minimize c^T x  subject to  A x = b,  x >= 0.
//
// Pivoting follows Bland's rule (smallest eligible index enters, ties in the
// ratio test go to the smallest basic index), so the method cannot cycle and
// the returned basis is deterministic.

#include "kronsketch/common.hpp"

#include <limits>
#include <vector>

namespace kronsketch {

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };
  Status status = Status::IterationLimit;
  Vector x;
  double objective = 0.0;
  int pivots = 0;
};

class DenseSimplex {
 public:
  explicit DenseSimplex(double tol = 1e-10, int max_pivots = 200000)
      : tol_(tol), max_pivots_(max_pivots) {}

  LpSolution solve(const Matrix& a, const Vector& b, const Vector& c) const {
    require_dims(a.rows() == b.size() && a.cols() == c.size(),
                 "DenseSimplex: inconsistent LP dimensions");
    const Eigen::Index rows = a.rows();
    const Eigen::Index n = a.cols();

    // Tableau columns: n structural, rows artificial, then the rhs.
    Matrix t = Matrix::Zero(rows + 1, n + rows + 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double sign = b(r) < 0 ? -1.0 : 1.0;
      t.row(r).head(n) = sign * a.row(r);
      t(r, n + r) = 1.0;
      t(r, n + rows) = sign * b(r);
    }
    std::vector<Eigen::Index> basis(rows);
    for (Eigen::Index r = 0; r < rows; ++r) basis[r] = n + r;

    LpSolution out;

    // Phase 1: minimize the sum of artificials.
    for (Eigen::Index r = 0; r < rows; ++r) {
      t.row(rows).head(n) -= t.row(r).head(n);
      t(rows, n + rows) -= t(r, n + rows);
    }
    auto phase1 = run(t, basis, n + rows, out.pivots);
    if (phase1 == LpSolution::Status::IterationLimit) return out;
    if (-t(rows, n + rows) > tol_ * (1.0 + b.cwiseAbs().sum())) {
      out.status = LpSolution::Status::Infeasible;
      return out;
    }

    // Pivot remaining artificials out of the basis; rows that cannot be
    // pivoted are redundant and are dropped.
    std::vector<char> keep(rows, 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (basis[r] < n) continue;
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(t(r, j)) > tol_) {
          enter = j;
          break;
        }
      if (enter < 0) {
        keep[r] = 0;
        continue;
      }
      pivot(t, basis, r, enter);
      ++out.pivots;
    }

    // Phase 2 on structural columns only: overwrite the objective row.
    Matrix t2 = Matrix::Zero(1, 1);
    {
      Eigen::Index kept = 0;
      for (char k : keep) kept += k;
      t2 = Matrix::Zero(kept + 1, n + 1);
      std::vector<Eigen::Index> basis2;
      Eigen::Index row = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!keep[r]) continue;
        t2.row(row).head(n) = t.row(r).head(n);
        t2(row, n) = t(r, n + rows);
        basis2.push_back(basis[r]);
        ++row;
      }
      t2.row(kept).head(n) = c.transpose();
      for (Eigen::Index r = 0; r < kept; ++r) {
        const double cb = c(basis2[r]);
        if (cb != 0.0) t2.row(kept) -= cb * t2.row(r);
      }
      basis = std::move(basis2);
    }
    const Eigen::Index kept = t2.rows() - 1;
    const auto phase2 = run(t2, basis, n, out.pivots);
    out.status = phase2;
    if (phase2 != LpSolution::Status::Optimal) return out;

    out.x = Vector::Zero(n);
    for (Eigen::Index r = 0; r < kept; ++r) out.x(basis[r]) = t2(r, n);
    out.objective = c.dot(out.x);
    return out;
  }

 private:
  // Runs simplex iterations on tableau t whose last row holds reduced costs
  // and last column the rhs. Only the first `eligible` columns may enter.
  LpSolution::Status run(Matrix& t, std::vector<Eigen::Index>& basis,
                         Eigen::Index eligible, int& pivots) const {
    const Eigen::Index rows = t.rows() - 1;
    const Eigen::Index rhs = t.cols() - 1;
    while (true) {
      if (pivots >= max_pivots_) return LpSolution::Status::IterationLimit;
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < eligible; ++j)
        if (t(rows, j) < -tol_) {
          enter = j;
          break;
        }
      if (enter < 0) return LpSolution::Status::Optimal;

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (t(r, enter) <= tol_) continue;
        const double ratio = t(r, rhs) / t(r, enter);
        if (leave < 0 || ratio < best - tol_ ||
            (ratio <= best + tol_ && basis[r] < basis[leave])) {
          leave = r;
          best = std::min(best, ratio);
        }
      }
      if (leave < 0) return LpSolution::Status::Unbounded;
      pivot(t, basis, leave, enter);
      ++pivots;
    }
  }

  static void pivot(Matrix& t, std::vector<Eigen::Index>& basis,
                    Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (r == row) continue;
      const double f = t(r, col);
      if (f != 0.0) t.row(r) -= f * t.row(row);
    }
    basis[row] = col;
  }

  double tol_;
  int max_pivots_;
};

}  // namespace kronsketch

#endif  // KRONSKETCH_SIMPLEX_HPP
