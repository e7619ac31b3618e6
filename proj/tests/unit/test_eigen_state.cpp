#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "msgpca/eigen_state.hpp"
#include "msgpca/error.hpp"
#include "msgpca/oracles.hpp"
#include "test_util.hpp"

namespace msgpca {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Rank1Update, ZeroStateGetsSingleEigenpair) {
  const EigenState s = rank1_update(EigenState(2), VectorXd::Unit(2, 0), 0.5);
  ASSERT_EQ(s.columns(), 1);
  EXPECT_NEAR(s.values()[0], 0.5, 1e-14);
  EXPECT_NEAR(std::abs(s.basis()(0, 0)), 1.0, 1e-14);
  EXPECT_EQ(s.rank(), 1);
}

TEST(Rank1Update, OrthogonalSampleAddsDirection) {
  const EigenState s0(MatrixXd::Identity(2, 1), VectorXd::Ones(1));
  const EigenState s = rank1_update(s0, VectorXd::Unit(2, 1), 1.0);
  ASSERT_EQ(s.columns(), 2);
  EXPECT_NEAR(s.values()[0], 1.0, 1e-14);
  EXPECT_NEAR(s.values()[1], 1.0, 1e-14);
  EXPECT_LT(max_abs(reconstruct(s) - MatrixXd::Identity(2, 2)), 1e-14);
}

TEST(Rank1Update, DiagonalSampleMatchesCharacteristicPolynomial) {
  const EigenState s0(MatrixXd::Identity(2, 1), VectorXd::Ones(1));
  const VectorXd x = VectorXd::Ones(2) / std::sqrt(2.0);
  const EigenState s = rank1_update(s0, x, 1.0);
  const auto [hi, lo] = oracle::eigenvalues_2x2(1.5, 0.5, 0.5);
  ASSERT_EQ(s.columns(), 2);
  EXPECT_NEAR(s.values()[0], hi, 1e-12);
  EXPECT_NEAR(s.values()[1], lo, 1e-12);
  EXPECT_NEAR(hi, 1.0 + std::sqrt(0.5), 1e-12);
}

TEST(Rank1Update, InSpanSampleKeepsRank) {
  const EigenState s0(MatrixXd::Identity(3, 2), VectorXd::Constant(2, 0.5));
  const EigenState s = rank1_update(s0, VectorXd::Unit(3, 1), 2.0);
  EXPECT_EQ(s.columns(), 2);
  EXPECT_NEAR(s.values()[0], 2.5, 1e-14);
}

TEST(Rank1Update, ZeroStepIsIdentity) {
  std::mt19937_64 rng(3);
  const EigenState s0 = random_state(rng, 6, 3);
  const EigenState s = rank1_update(s0, random_vector(rng, 6), 0.0);
  EXPECT_LT(max_abs(reconstruct(s) - reconstruct(s0)), 1e-14);
  EXPECT_LE(s.rank(), s0.rank());
}

TEST(Rank1Update, RejectsBadInput) {
  const EigenState s(3);
  EXPECT_THROW(rank1_update(s, VectorXd::Ones(2), 1.0), DimensionMismatch);
  VectorXd bad = VectorXd::Ones(3);
  bad[1] = std::nan("");
  EXPECT_THROW(rank1_update(s, bad, 1.0), NonFiniteInput);
  EXPECT_THROW(rank1_update(s, VectorXd::Ones(3), -1.0), NonFiniteInput);
}

TEST(Rank1Update, RandomInstancesAreExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Index d = std::uniform_int_distribution<Index>(1, 16)(rng);
    const Index m = std::uniform_int_distribution<Index>(0, d)(rng);
    const EigenState s0 = random_state(rng, d, m);
    const VectorXd x = random_vector(rng, d);
    const double eta = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const EigenState s = rank1_update(s0, x, eta);
    const MatrixXd expected = reconstruct(s0) + eta * x * x.transpose();
    EXPECT_LT(max_abs(reconstruct(s) - expected), 1e-8) << "trial " << trial;
    EXPECT_LE(s.rank(), s0.rank() + 1);
    EXPECT_LE(s.orthonormality_error(), kOrthonormalityTolerance);
  }
}

TEST(Rank1Update, NonzeroComplementIsTracked) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 5;
    EigenState s0 = random_state(rng, d, 2);
    s0 = EigenState(s0.basis(), s0.values(), 0.25);
    const VectorXd x = random_vector(rng, d);
    const EigenState s = rank1_update(s0, x, 0.7);
    EXPECT_LT(max_abs(reconstruct(s) - reconstruct(s0) - 0.7 * x * x.transpose()), 1e-10);
    EXPECT_DOUBLE_EQ(s.complement(), 0.25);
  }
}

TEST(Rank1Update, LongChainsStayOrthonormal) {
  std::mt19937_64 rng(17);
  const Index d = 8;
  EigenState s(d);
  MatrixXd dense = MatrixXd::Zero(d, d);
  for (int t = 0; t < 2000; ++t) {
    VectorXd x = random_vector(rng, d) * 0.1;
    s = rank1_update(s, x, 0.5);
    dense += 0.5 * x * x.transpose();
    EXPECT_LE(s.orthonormality_error(), kOrthonormalityTolerance);
    EXPECT_LT(s.updates_since_reorthonormalization(), kReorthonormalizeInterval);
  }
  EXPECT_LT(max_abs(reconstruct(s) - dense), 1e-8 * std::max(1.0, max_abs(dense)));
}

TEST(Reconstruct, Examples) {
  EXPECT_EQ(max_abs(reconstruct(EigenState(2))), 0.0);
  const EigenState one(MatrixXd::Identity(2, 1), VectorXd::Ones(1));
  MatrixXd expected = MatrixXd::Zero(2, 2);
  expected(0, 0) = 1.0;
  EXPECT_EQ(max_abs(reconstruct(one) - expected), 0.0);
  const EigenState two(MatrixXd::Identity(2, 2), (VectorXd(2) << 0.7, 0.3).finished());
  expected(0, 0) = 0.7;
  expected(1, 1) = 0.3;
  EXPECT_LT(max_abs(reconstruct(two) - expected), 1e-15);
}

TEST(Reconstruct, ComplementFillsOrthogonalSpace) {
  const EigenState s(MatrixXd::Identity(3, 1), VectorXd::Ones(1), 0.5);
  const MatrixXd m = reconstruct(s);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(m(2, 2), 0.5);
  EXPECT_EQ(s.rank(), 3);
  EXPECT_DOUBLE_EQ(s.trace(), 2.0);
}

TEST(EigenState, ConstructorSortsDescending) {
  const EigenState s(MatrixXd::Identity(3, 3), (VectorXd(3) << 0.1, 0.9, 0.5).finished());
  EXPECT_DOUBLE_EQ(s.values()[0], 0.9);
  EXPECT_DOUBLE_EQ(s.values()[2], 0.1);
  EXPECT_DOUBLE_EQ(s.basis()(1, 0), 1.0);
}

TEST(EigenState, ConstructorValidates) {
  EXPECT_THROW(EigenState(0), DimensionMismatch);
  EXPECT_THROW(EigenState(MatrixXd::Ones(2, 2), VectorXd::Ones(2)), Error);
  EXPECT_THROW(EigenState(MatrixXd::Identity(2, 2), VectorXd::Ones(1)), DimensionMismatch);
  VectorXd bad = VectorXd::Ones(1);
  bad[0] = INFINITY;
  EXPECT_THROW(EigenState(MatrixXd::Identity(2, 1), bad), NonFiniteInput);
}

TEST(EigenState, DistinctMergesCloseValues) {
  const EigenState s(MatrixXd::Identity(5, 3),
                     (VectorXd(3) << 0.8, 0.8 + 1e-11, 0.3).finished());
  std::vector<Index> groups;
  Index complement_group = -2;
  const Spectrum spec = s.distinct(kMergeTolerance, &groups, &complement_group);
  ASSERT_EQ(spec.values.size(), 3u);
  EXPECT_EQ(spec.mults, (std::vector<Index>{2, 1, 2}));
  EXPECT_NEAR(spec.values[0], 0.8, 1e-10);
  EXPECT_DOUBLE_EQ(spec.values[2], 0.0);
  EXPECT_EQ(groups, (std::vector<Index>{0, 0, 1}));
  EXPECT_EQ(complement_group, 2);
  EXPECT_EQ(spec.total_multiplicity(), 5);
}

TEST(EigenState, DistinctMergesComplementWithEqualColumn) {
  const EigenState s(MatrixXd::Identity(3, 1), VectorXd::Zero(1), 0.0);
  const Spectrum spec = s.distinct();
  ASSERT_EQ(spec.values.size(), 1u);
  EXPECT_EQ(spec.mults[0], 3);
}

TEST(Reorthonormalize, PreservesMatrixAndRestoresBasis) {
  std::mt19937_64 rng(23);
  const EigenState exact = random_state(rng, 7, 4);
  MatrixXd drifted = exact.basis();
  drifted += 1e-7 * MatrixXd::Random(7, 4);
  const EigenState noisy(drifted, exact.values(), 0.0, EigenState::Check::kNone);
  const EigenState fixed = reorthonormalize(noisy);
  EXPECT_LT(fixed.orthonormality_error(), 1e-13);
  EXPECT_LT(max_abs(reconstruct(fixed) - drifted * exact.values().asDiagonal() *
                                             drifted.transpose()),
            1e-12);
  EXPECT_EQ(fixed.updates_since_reorthonormalization(), 0u);
}

TEST(CompleteBasis, IsOrthogonalToInput) {
  std::mt19937_64 rng(29);
  for (Index m = 0; m <= 6; ++m) {
    const EigenState s = random_state(rng, 6, m);
    const MatrixXd extra = complete_basis(s.basis(), 6 - m);
    ASSERT_EQ(extra.cols(), 6 - m);
    EXPECT_LT(max_abs(s.basis().transpose() * extra), 1e-12);
    EXPECT_LT(max_abs(extra.transpose() * extra - MatrixXd::Identity(6 - m, 6 - m)), 1e-12);
  }
  EXPECT_THROW(complete_basis(MatrixXd::Identity(3, 2), 2), DimensionMismatch);
}

TEST(TopDirections, PadsWithComplement) {
  const EigenState s(MatrixXd::Identity(4, 1), VectorXd::Ones(1));
  const MatrixXd top = top_directions(s, 3);
  ASSERT_EQ(top.cols(), 3);
  EXPECT_DOUBLE_EQ(top(0, 0), 1.0);
  EXPECT_LT(max_abs(top.transpose() * top - MatrixXd::Identity(3, 3)), 1e-12);
}

TEST(TopDirections, ComplementOutranksSmallColumns) {
  // diag(0.1, 0.6, 0.6): the complement (0.6) beats the explicit 0.1.
  const EigenState s(MatrixXd::Identity(3, 1), (VectorXd(1) << 0.1).finished(), 0.6);
  const MatrixXd top = top_directions(s, 1);
  EXPECT_NEAR(std::abs(top(0, 0)), 0.0, 1e-12);
}

}  // namespace
}  // namespace msgpca
