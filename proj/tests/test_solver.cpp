#include "kronsketch/ensemble.hpp"
#include "kronsketch/solver.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

using namespace kronsketch;

namespace {

struct Instance {
  SketchOperator op;
  Matrix x;
  Matrix y;
};

Instance planted(int p, int m, int d, int delta, std::uint64_t seed,
                 ValueSpec values = ValueSpec::gaussian()) {
  const BipartiteGraph g = gen_left_regular(p, m, delta, derive_seed(seed, 0));
  const Support s = gen_distributed_support(p, d, derive_seed(seed, 1));
  Matrix x = gen_distributed_matrix(s, values, derive_seed(seed, 2));
  SketchOperator op(g);
  Matrix y = op.forward(x);
  return {std::move(op), std::move(x), std::move(y)};
}

// Plain ISTA with the exact Lipschitz constant, run for a fixed number of steps.
double ista_oracle_objective(const SketchOperator& op, const Matrix& y, double lambda,
                             long iterations) {
  const Matrix k = op.kron_materialize();
  const double sigma = Eigen::JacobiSVD<Matrix>(k).singularValues()(0);
  const double lip = 2.0 * sigma * sigma;
  const Vector yv = vec(y);
  Vector x = Vector::Zero(k.cols());
  for (long it = 0; it < iterations; ++it) {
    const Vector grad = 2.0 * k.transpose() * (k * x - yv);
    x = x - grad / lip;
    const double t = lambda / lip;
    x = x.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
  }
  return (k * x - yv).squaredNorm() + lambda * x.cwiseAbs().sum();
}

}  // namespace

TEST(SolverOptions, Validation) {
  SolverOptions o;
  EXPECT_NO_THROW(o.validate());
  o.tol_feas = 0;
  EXPECT_THROW(o.validate(), ParameterError);
  o = {};
  o.max_iter = 0;
  EXPECT_THROW(o.validate(), ParameterError);
}

TEST(SolveP1, ZeroSketchGivesZero) {
  const SketchOperator op(gen_left_regular(10, 5, 2, 1));
  const RecoveryResult r = solve_p1(op, Matrix::Zero(5, 5));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(l1_norm(r.x), 0.0);
  EXPECT_EQ(r.objective, 0.0);
}

TEST(SolveP1, RejectsMisshapenSketch) {
  const SketchOperator op(gen_left_regular(10, 5, 2, 1));
  EXPECT_THROW(solve_p1(op, Matrix::Zero(4, 5)), DimensionError);
}

TEST(SolveP1, RecoversTwoDistributedMatrix) {
  int successes = 0;
  for (int t = 0; t < 5; ++t) {
    const Instance in = planted(40, 21, 2, 4, derive_seed(31, t));
    const RecoveryResult r = solve_p1(in.op, in.y);
    EXPECT_TRUE(r.converged) << r.message;
    EXPECT_LE(r.feas_residual, 1e-8);
    successes += linf_norm(r.x - in.x) <= 1e-4;
  }
  EXPECT_GE(successes, 4);
}

TEST(SolveP1, FeasibleEvenWhenNotIdentifiable) {
  const Instance in = planted(30, 8, 4, 3, 5);
  SolverOptions o;
  o.max_iter = 3000;
  const RecoveryResult r = solve_p1(in.op, in.y, o);
  EXPECT_LE(r.feas_residual, 1e-6);
  EXPECT_LE(r.objective, l1_norm(in.x) + 1e-6);
}

TEST(SolveP1, MatchesLpOnDiagonalInstance) {
  const Instance in = planted(5, 3, 1, 2, 77);
  const RecoveryResult admm = solve_p1(in.op, in.y);
  const RecoveryResult lp = lp_oracle(in.op, in.y);
  ASSERT_TRUE(lp.converged);
  EXPECT_NEAR(admm.objective, lp.objective, 1e-6);
}

TEST(SolveP1, MatchesLpOnFiftySmallInstances) {
  Rng rng(99);
  for (int t = 0; t < 50; ++t) {
    const int p = 3 + static_cast<int>(rng.below(4));
    const int m = 2 + static_cast<int>(rng.below(3));
    const int d = 1 + static_cast<int>(rng.below(std::min(p, 3)));
    const Instance in = planted(p, m, d, 2, derive_seed(99, t));
    const RecoveryResult lp = lp_oracle(in.op, in.y);
    const RecoveryResult admm = solve_p1(in.op, in.y);
    ASSERT_TRUE(lp.converged) << lp.message;
    EXPECT_LE(lp.feas_residual, 1e-9);
    EXPECT_NEAR(admm.objective, lp.objective, 1e-6) << "instance " << t;
    EXPECT_LE(lp.objective, admm.objective + 1e-6);
  }
}

// Every solution is feasible with objective at most ||X||_1; exact recovery
// is required on a majority of sampled graphs.
TEST(LpOracle, RecoversDiagonalOnMostSampledGraphs) {
  int exact = 0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    const Instance in = planted(4 + t % 3, 8, 1, 2, derive_seed(123, t));
    const RecoveryResult lp = lp_oracle(in.op, in.y);
    ASSERT_TRUE(lp.converged);
    EXPECT_LE(lp.feas_residual, 1e-9);
    EXPECT_LE(lp.objective, l1_norm(in.x) + 1e-9);
    exact += linf_norm(lp.x - in.x) <= 1e-9;
  }
  EXPECT_GE(exact, trials / 2);
}

TEST(LpOracle, RecoversDiagonalWithDistinctSingleEdges) {
  // delta = 1 with distinct targets: A is a partial permutation.
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<int>> slots;
    for (int i = 0; i < 5; ++i) slots.push_back({(i + t) % 6});
    const SketchOperator op(BipartiteGraph(5, 6, 1, slots));
    const Matrix x = gen_distributed_matrix(Support::diagonal(5), ValueSpec::gaussian(),
                                            derive_seed(5, t));
    const RecoveryResult lp = lp_oracle(op, op.forward(x));
    EXPECT_LE(linf_norm(lp.x - x), 1e-9);
  }
}

TEST(LpOracle, ZeroSketchAndGuard) {
  const SketchOperator op(gen_left_regular(5, 3, 2, 1));
  const RecoveryResult r = lp_oracle(op, Matrix::Zero(3, 3));
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(l1_norm(r.x), 0.0);
  EXPECT_THROW(lp_oracle(SketchOperator(gen_left_regular(11, 3, 2, 1)), Matrix::Zero(3, 3)),
               ParameterError);
}

TEST(SolveP2, LargeLambdaGivesZero) {
  const Instance in = planted(20, 10, 3, 3, 8);
  const double lambda = 2.0 * linf_norm(in.op.adjoint(in.y));
  const RecoveryResult r = solve_p2(in.op, in.y, lambda);
  EXPECT_EQ(l1_norm(r.x), 0.0);
  EXPECT_TRUE(r.converged);
}

TEST(SolveP2, IdentityOperatorSoftThresholdsAtHalfLambda) {
  Rng rng(4);
  const Matrix y = gaussian_matrix(8, 8, rng);
  const SketchOperator op(Matrix(Matrix::Identity(8, 8)));
  const double lambda = 0.7;
  const RecoveryResult r = solve_p2(op, y, lambda);
  EXPECT_LE(linf_norm(r.x - soft_threshold(y, lambda / 2)), 1e-8);
}

TEST(SolveP2, MatchesLongRunIsta) {
  const Instance in = planted(4, 3, 2, 2, 12);
  Rng rng(5);
  const Matrix y = in.y + 0.1 * gaussian_matrix(3, 3, rng);
  const double lambda = 0.3;
  const RecoveryResult r = solve_p2(in.op, y, lambda);
  const double oracle = ista_oracle_objective(in.op, y, lambda, 1000000);
  const double ours = (in.op.forward(r.x) - y).squaredNorm() + lambda * l1_norm(r.x);
  EXPECT_NEAR(ours, oracle, 1e-8);
}

TEST(SolveP2, RejectsNonPositiveLambda) {
  const Instance in = planted(6, 3, 1, 2, 1);
  EXPECT_THROW(solve_p2(in.op, in.y, 0.0), ParameterError);
}

TEST(SolveConstrained, LargeKappaGivesZero) {
  const Instance in = planted(20, 10, 3, 3, 9);
  const RecoveryResult r = solve_constrained(in.op, in.y, in.y.norm());
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(l1_norm(r.x), 0.0);
}

TEST(SolveConstrained, ZeroKappaIsBasisPursuit) {
  const Instance in = planted(40, 21, 2, 4, 10);
  const RecoveryResult a = solve_constrained(in.op, in.y, 0.0);
  const RecoveryResult b = solve_p1(in.op, in.y);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.converged, b.converged);
}

TEST(SolveConstrained, ResidualMatchesKappa) {
  const Instance in = planted(30, 15, 3, 4, 11);
  Rng rng(6);
  const Matrix y = in.y + 0.05 * gaussian_matrix(15, 15, rng);
  const double kappa = 0.1 * y.norm();
  SolverOptions o;
  o.max_iter = 2000;
  o.tol_residual = 1e-6;
  const RecoveryResult r = solve_constrained(in.op, y, kappa, o);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR((in.op.forward(r.x) - y).norm(), kappa, 0.01 * kappa);
  EXPECT_LT(l1_norm(r.x), l1_norm(in.x) * 1.5);
  EXPECT_THROW(solve_constrained(in.op, y, -1.0), ParameterError);
}

TEST(Helpers, SoftThresholdAndResidual) {
  Matrix x(1, 3);
  x << -2, 0.5, 3;
  Matrix expected(1, 3);
  expected << -1, 0, 2;
  EXPECT_EQ(soft_threshold(x, 1.0), expected);
  const SketchOperator op(Matrix(Matrix::Identity(2, 2)));
  EXPECT_DOUBLE_EQ(feasibility_residual(op, Matrix::Zero(2, 2), 3.0 * Matrix::Identity(2, 2)),
                   std::sqrt(18.0) / std::sqrt(18.0));
}
