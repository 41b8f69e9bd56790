#ifndef KRONSKETCH_OPERATOR_HPP
#define KRONSKETCH_OPERATOR_HPP

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"

#include <Eigen/Eigenvalues>

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace kronsketch {

// Column-stacking vectorization: vec(X)[j * rows + i] = X(i, j).
inline Vector vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  require_dims(rows >= 0 && cols >= 0 && v.size() == rows * cols,
               "unvec: length does not match rows * cols");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// The linear map X -> A X B^T together with its adjoint M -> A^T M B.
// A (m x p1) and B (m x p2) are held as sparse column lists; X is p1 x p2.
class SketchOperator {
 public:
  struct Entry {
    int row;
    double value;
  };
  using Columns = std::vector<std::vector<Entry>>;

  SketchOperator(const BipartiteGraph& g1, const BipartiteGraph& g2,
                 bool clip_binary = false)
      : SketchOperator(g1.adjacency(clip_binary), g2.adjacency(clip_binary)) {}

  explicit SketchOperator(const BipartiteGraph& g, bool clip_binary = false)
      : SketchOperator(g.adjacency(clip_binary)) {}

  // B = A.
  explicit SketchOperator(const Matrix& a) : SketchOperator(a, a) {}

  SketchOperator(const Matrix& a, const Matrix& b)
      : m_(a.rows()), p1_(a.cols()), p2_(b.cols()), a_(a), b_(b) {
    require_dims(a.rows() == b.rows(),
                 "SketchOperator: A and B must have the same number of rows");
    require_dims(a.rows() >= 1 && a.cols() >= 1 && b.cols() >= 1,
                 "SketchOperator: empty sketch matrix");
    a_cols_ = to_columns(a);
    b_cols_ = to_columns(b);
    shared_ = (a.cols() == b.cols()) && a == b;
  }

  Eigen::Index m() const { return m_; }
  Eigen::Index p1() const { return p1_; }
  Eigen::Index p2() const { return p2_; }
  bool shared() const { return shared_; }
  bool square() const { return p1_ == p2_; }

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Columns& a_columns() const { return a_cols_; }
  const Columns& b_columns() const { return b_cols_; }

  // Y = (A X) B^T without forming the Kronecker product.
  Matrix forward(const Matrix& x) const {
    require_dims(x.rows() == p1_ && x.cols() == p2_,
                 "sketch_forward: X has the wrong shape");
    Matrix ax = Matrix::Zero(m_, p2_);
    for (Eigen::Index c = 0; c < p2_; ++c)
      for (Eigen::Index i = 0; i < p1_; ++i) {
        const double v = x(i, c);
        if (v == 0.0) continue;
        for (const Entry& e : a_cols_[i]) ax(e.row, c) += e.value * v;
      }
    Matrix y = Matrix::Zero(m_, m_);
    for (Eigen::Index c = 0; c < p2_; ++c)
      for (const Entry& e : b_cols_[c]) y.col(e.row) += e.value * ax.col(c);
    return y;
  }

  // A^T M B.
  Matrix adjoint(const Matrix& mm) const {
    require_dims(mm.rows() == m_ && mm.cols() == m_,
                 "sketch_adjoint: M has the wrong shape");
    Matrix mb(m_, p2_);
    for (Eigen::Index c = 0; c < p2_; ++c) {
      mb.col(c).setZero();
      for (const Entry& e : b_cols_[c]) mb.col(c) += e.value * mm.col(e.row);
    }
    Matrix out(p1_, p2_);
    for (Eigen::Index c = 0; c < p2_; ++c)
      for (Eigen::Index i = 0; i < p1_; ++i) {
        double s = 0.0;
        for (const Entry& e : a_cols_[i]) s += e.value * mb(e.row, c);
        out(i, c) = s;
      }
    return out;
  }

  // B (x) A as a dense m^2 x (p1 p2) matrix, so that K vec(X) = vec(A X B^T).
  Matrix kron_materialize(Eigen::Index max_p = 64) const {
    require(p1_ <= max_p && p2_ <= max_p,
            "kron_materialize: p exceeds the materialization guard");
    Matrix k(m_ * m_, p1_ * p2_);
    for (Eigen::Index bj = 0; bj < m_; ++bj)
      for (Eigen::Index bc = 0; bc < p2_; ++bc)
        k.block(bj * m_, bc * p1_, m_, p1_) = b_(bj, bc) * a_;
    return k;
  }

  // Column of B (x) A belonging to X(i, c): vec(a_i b_c^T).
  Vector kron_column(Eigen::Index i, Eigen::Index c) const {
    Vector col = Vector::Zero(m_ * m_);
    for (const Entry& eb : b_cols_[c])
      for (const Entry& ea : a_cols_[i])
        col(eb.row * m_ + ea.row) += ea.value * eb.value;
    return col;
  }

  // Induced l1 norm of B (x) A (largest absolute column sum).
  double l1_operator_norm() const {
    auto col_max = [](const Matrix& mat) {
      return mat.cwiseAbs().colwise().sum().maxCoeff();
    };
    return col_max(a_) * col_max(b_);
  }

 private:
  static Columns to_columns(const Matrix& mat) {
    Columns cols(mat.cols());
    for (Eigen::Index c = 0; c < mat.cols(); ++c)
      for (Eigen::Index r = 0; r < mat.rows(); ++r)
        if (mat(r, c) != 0.0)
          cols[c].push_back({static_cast<int>(r), mat(r, c)});
    return cols;
  }

  Eigen::Index m_, p1_, p2_;
  Matrix a_, b_;
  Columns a_cols_, b_cols_;
  bool shared_ = false;
};

inline Matrix sketch_forward(const SketchOperator& op, const Matrix& x) {
  return op.forward(x);
}

inline Matrix sketch_adjoint(const SketchOperator& op, const Matrix& mm) {
  return op.adjoint(mm);
}

inline Matrix kron_materialize(const SketchOperator& op, Eigen::Index max_p = 64) {
  return op.kron_materialize(max_p);
}

// Applies (K K^T)^+ for K = B (x) A using K K^T = (B B^T) (x) (A A^T) and
// the eigendecompositions of the two m x m Gram factors. This gives the
// exact orthogonal projection onto {X : A X B^T = Y} (least-squares point
// when Y is outside the range).
class GramPseudoInverse {
 public:
  explicit GramPseudoInverse(const SketchOperator& op, double rel_cutoff = 1e-10)
      : op_(&op) {
    Eigen::SelfAdjointEigenSolver<Matrix> ea(op.a() * op.a().transpose());
    ua_ = ea.eigenvectors();
    Vector la = ea.eigenvalues().cwiseMax(0.0);
    Vector lb;
    if (op.shared()) {
      ub_ = ua_;
      lb = la;
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eb(op.b() * op.b().transpose());
      ub_ = eb.eigenvectors();
      lb = eb.eigenvalues().cwiseMax(0.0);
    }
    const double top = la.maxCoeff() * lb.maxCoeff();
    inv_ = Matrix::Zero(la.size(), lb.size());
    rank_ = 0;
    for (Eigen::Index i = 0; i < la.size(); ++i)
      for (Eigen::Index j = 0; j < lb.size(); ++j) {
        const double s = la(i) * lb(j);
        if (s > rel_cutoff * top) {
          inv_(i, j) = 1.0 / s;
          ++rank_;
        }
      }
  }

  // (K K^T)^+ applied to an m x m residual.
  Matrix apply(const Matrix& w) const {
    Matrix t = ua_.transpose() * w * ub_;
    t.array() *= inv_.array();
    return ua_ * t * ub_.transpose();
  }

  // Orthogonal projection of X onto {A X B^T = Y}.
  Matrix project_affine(const Matrix& x, const Matrix& y) const {
    return x - op_->adjoint(apply(op_->forward(x) - y));
  }

  // Orthogonal projection onto ker(X -> A X B^T).
  Matrix project_kernel(const Matrix& x) const {
    return x - op_->adjoint(apply(op_->forward(x)));
  }

  // Rank of K K^T, i.e. of the sketch operator.
  Eigen::Index rank() const { return rank_; }

 private:
  const SketchOperator* op_;
  Matrix ua_, ub_, inv_;
  Eigen::Index rank_ = 0;
};

}  // namespace kronsketch

#endif  // KRONSKETCH_OPERATOR_HPP
