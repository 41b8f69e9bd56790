#include "kronsketch/ensemble.hpp"
#include "kronsketch/verify.hpp"

#include <gtest/gtest.h>

#include "expansion_oracle.hpp"

using namespace kronsketch;
using namespace kronsketch::testing;

namespace {

void expect_same(const ExpansionReport& a, const ExpansionReport& b) {
  EXPECT_EQ(a.neighborhood_size, b.neighborhood_size);
  EXPECT_EQ(a.max_collision_outside, b.max_collision_outside);
  EXPECT_EQ(a.max_collision_inside, b.max_collision_inside);
  EXPECT_EQ(a.bound, b.bound);
  EXPECT_EQ(a.collision_bound, b.collision_bound);
  EXPECT_EQ(a.part1, b.part1);
  EXPECT_EQ(a.part2, b.part2);
  EXPECT_EQ(a.part3, b.part3);
}

}  // namespace

TEST(CheckExpansion, SingleEdgeDiagonal) {
  const TensorGraph tg(BipartiteGraph(2, 2, 1, {{0}, {1}}));
  const ExpansionReport r = check_expansion(tg, Support::diagonal(2), 0.25);
  EXPECT_EQ(r.neighborhood_size, 2);
  EXPECT_LE(r.max_collision_outside, 1);
  EXPECT_LE(r.max_collision_inside, 1);
  expect_same(r, expansion_oracle(tg, Support::diagonal(2), 0.25));
}

TEST(CheckExpansion, HandFixtureMatchesOracle) {
  const TensorGraph tg(BipartiteGraph(3, 2, 2, {{0, 1}, {0, 0}, {1, 1}}));
  for (const Support& omega : {Support::diagonal(3), Support::full(3)})
    expect_same(check_expansion(tg, omega, 0.2), expansion_oracle(tg, omega, 0.2));
}

TEST(CheckExpansion, ExhaustiveOracleOnSmallFixtures) {
  Rng rng(21);
  for (int t = 0; t < 300; ++t) {
    const int p = 2 + static_cast<int>(rng.below(7));
    const int m = 1 + static_cast<int>(rng.below(6));
    const int delta = 1 + static_cast<int>(rng.below(3));
    const int d = 1 + static_cast<int>(rng.below(p));
    const BipartiteGraph g1 = gen_left_regular(p, m, delta, derive_seed(21, t, 0));
    const BipartiteGraph g2 = t % 2 ? gen_left_regular(p, m, delta, derive_seed(21, t, 1)) : g1;
    const TensorGraph tg(g1, g2);
    const Support omega = gen_distributed_support(p, d, derive_seed(21, t, 2));
    const double eps = 0.05 + 0.2 * rng.uniform();
    expect_same(check_expansion(tg, omega, eps), expansion_oracle(tg, omega, eps));
  }
}

TEST(CheckExpansion, ParameterGuards) {
  const TensorGraph tg(gen_left_regular(10, 5, 2, 1));
  const Support omega = Support::diagonal(10);
  EXPECT_THROW(check_expansion(tg, omega, 0.0), ParameterError);
  EXPECT_THROW(check_expansion(tg, omega, 0.3), ParameterError);
  EXPECT_NO_THROW(check_expansion(tg, omega, 0.25));
  EXPECT_THROW(check_expansion(tg, Support::diagonal(9), 0.1), DimensionError);
  const TensorGraph big(gen_left_regular(301, 5, 2, 1));
  EXPECT_THROW(check_expansion(big, Support::diagonal(301), 0.1), ParameterError);
}

TEST(CheckRip, SingleNonzeroWithDistinctNeighborsIsIsometric) {
  const SketchOperator op(BipartiteGraph(3, 4, 2, {{0, 1}, {2, 3}, {1, 2}}));
  Matrix x = Matrix::Zero(3, 3);
  x(1, 2) = -2.5;
  const RipReport r = check_rip1(op, x, 0.1);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
  EXPECT_TRUE(r.lower_ok);
  EXPECT_TRUE(r.upper_ok);
}

TEST(CheckRip, UpperBoundAlwaysHolds) {
  for (int t = 0; t < 200; ++t) {
    const SketchOperator op(gen_left_regular(30, 12, 3, derive_seed(3, t, 0)));
    const Support s = gen_distributed_support(30, 4, derive_seed(3, t, 1));
    const RipReport r =
        check_rip1(op, gen_distributed_matrix(s, ValueSpec::gaussian(), derive_seed(3, t, 2)), 0.25);
    EXPECT_TRUE(r.upper_ok) << r.ratio;
    EXPECT_GT(r.ratio, 0.0);
  }
}

TEST(CheckRip, Guards) {
  const SketchOperator indep(gen_left_regular(5, 3, 2, 1), gen_left_regular(5, 3, 2, 2));
  EXPECT_THROW(check_rip1(indep, Matrix::Identity(5, 5), 0.1), ParameterError);
  const SketchOperator op(gen_left_regular(5, 3, 2, 1));
  EXPECT_THROW(check_rip1(op, Matrix::Zero(5, 5), 0.1), ParameterError);
}

TEST(SupportMassRatio, EdgeCases) {
  Matrix v = Matrix::Ones(3, 3);
  EXPECT_EQ(support_mass_ratio(v, Support(3)), 0.0);
  EXPECT_DOUBLE_EQ(support_mass_ratio(v, Support::diagonal(3)), 3.0 / 6.0);
}

TEST(CheckNullspace, DenseKernelSamplesAreInKernel) {
  const SketchOperator op(gen_left_regular(5, 3, 2, 4));
  const Support omega = Support::diagonal(5);
  const NullspaceReport r = check_nullspace(op, omega, 100, 1);
  EXPECT_TRUE(r.dense);
  EXPECT_EQ(r.kernel_dimension, 25 - GramPseudoInverse(op).rank());
  EXPECT_LE(r.max_projection_residual, 1e-10);
  EXPECT_GT(r.max_ratio, 0.0);
}

TEST(CheckNullspace, ProjectedPathAgreesOnKernelDimension) {
  const SketchOperator op(gen_left_regular(6, 4, 2, 5));
  const Support omega = gen_distributed_support(6, 2, 6);
  const NullspaceReport dense = check_nullspace(op, omega, 20, 2);
  const NullspaceReport projected = check_nullspace(op, omega, 20, 2, 0);
  EXPECT_TRUE(dense.dense);
  EXPECT_FALSE(projected.dense);
  EXPECT_EQ(dense.kernel_dimension, projected.kernel_dimension);
  EXPECT_LE(projected.max_projection_residual, 1e-8);
}

TEST(CheckNullspace, EmptySupportGivesZeroRatio) {
  const SketchOperator op(gen_left_regular(20, 8, 3, 7));
  const NullspaceReport r = check_nullspace(op, Support(20), 10, 3);
  EXPECT_EQ(r.max_ratio, 0.0);
}

TEST(CheckNullspace, TrivialKernel) {
  const SketchOperator op(Matrix(Matrix::Identity(4, 4)));
  const NullspaceReport r = check_nullspace(op, Support::diagonal(4), 10, 3);
  EXPECT_EQ(r.kernel_dimension, 0);
  EXPECT_EQ(r.max_ratio, 0.0);
}

TEST(ArrowWitness, SameSketchDifferentMatrices) {
  for (int t = 0; t < 10; ++t) {
    const SketchOperator op(gen_left_regular(40, 21, 4, derive_seed(8, t)));
    const ArrowWitness w = arrow_ambiguity_witness(op, derive_seed(9, t));
    EXPECT_LE(w.sketch_residual, 1e-10);
    EXPECT_GT(l1_norm(w.x - w.x_tilde), 1e-3);
    EXPECT_EQ(degree_of_sparsity(w.x), 40);
  }
}

TEST(ArrowWitness, InvertibleSquareSketchHasNoWitness) {
  Matrix a = Matrix::Identity(5, 5);
  a(0, 1) = 1.0;
  EXPECT_THROW(arrow_ambiguity_witness(SketchOperator(a), 1), VerificationError);
}
