#include "oracles.hpp"

#include "supcp/errors.hpp"
#include "supcp/tensor.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace supcp;
using supcp::testing::random_array;
using supcp::testing::random_matrix;

namespace {

MultiwayArray iota_array(const Dims& dims) {
  MultiwayArray x(dims);
  std::iota(x.values().begin(), x.values().end(), 1.0);
  return x;
}

}  // namespace

TEST(MultiwayArray, RejectsZeroDimAndBadLength) {
  EXPECT_THROW(MultiwayArray(Dims{2, 0}), InvalidArgument);
  EXPECT_THROW(MultiwayArray(Dims{2, 2}, {1, 2, 3}), InvalidArgument);
}

TEST(MultiwayArray, ModeOneFastestOffsets) {
  const MultiwayArray x = iota_array({2, 3, 4});
  EXPECT_EQ(x({1, 0, 0}), 2.0);
  EXPECT_EQ(x({0, 1, 0}), 3.0);
  EXPECT_EQ(x({0, 0, 1}), 7.0);
  EXPECT_EQ(x({1, 2, 3}), 24.0);
}

TEST(OuterProduct, Examples) {
  const std::vector<Vector> ab{Vector{{1, 2}}, Vector{{3, 4}}};
  const MultiwayArray x = outer_product(ab);
  EXPECT_EQ(x.dims(), (Dims{2, 2}));
  EXPECT_EQ(x({0, 0}), 3.0);
  EXPECT_EQ(x({0, 1}), 4.0);
  EXPECT_EQ(x({1, 0}), 6.0);
  EXPECT_EQ(x({1, 1}), 8.0);

  const std::vector<Vector> ones{Vector::Ones(1), Vector::Ones(1), Vector::Ones(1)};
  EXPECT_EQ(outer_product(ones).values()[0], 1.0);

  // Entries [1,2,1] and [1,2,2] (1-based) are the only nonzeros.
  const std::vector<Vector> sparse{Vector{{1, 0}}, Vector{{0, 1}}, Vector{{2, 2}}};
  const MultiwayArray s = outer_product(sparse);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        const double expected = (i == 0 && j == 1) ? 2.0 : 0.0;
        EXPECT_EQ(s({i, j, k}), expected);
      }
}

TEST(Unfold, TwoWayModeOneIsIdentity) {
  const MultiwayArray x({2, 2}, {1, 3, 2, 4});
  EXPECT_EQ(unfold(x, 0), (Matrix{{1, 2}, {3, 4}}));
}

TEST(Unfold, ThreeWayExamples) {
  const MultiwayArray x = iota_array({2, 2, 2});
  EXPECT_EQ(unfold(x, 0), (Matrix{{1, 3, 5, 7}, {2, 4, 6, 8}}));
  EXPECT_EQ(unfold(x, 2), (Matrix{{1, 2, 3, 4}, {5, 6, 7, 8}}));
  EXPECT_EQ(unfold(x, 1), (Matrix{{1, 2, 5, 6}, {3, 4, 7, 8}}));
}

TEST(Fold, RoundTripsExactly) {
  const MultiwayArray small = iota_array({2, 2, 2});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(fold(unfold(small, k), small.dims(), k), small);
  EXPECT_EQ(fold(Matrix::Constant(1, 1, 5.0), {1, 1, 1}, 0).values()[0], 5.0);

  std::mt19937_64 rng(11);
  const MultiwayArray x = random_array(rng, {3, 4, 5});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(fold(unfold(x, k), x.dims(), k), x);
}

TEST(Unfold, PreservesNorm) {
  std::mt19937_64 rng(3);
  const MultiwayArray x = random_array(rng, {3, 2, 4, 5});
  for (std::size_t k = 0; k < x.order(); ++k) EXPECT_NEAR(unfold(x, k).norm(), x.frobenius_norm(), 1e-12);
}

TEST(Vmat, Examples) {
  std::mt19937_64 rng(5);
  const Matrix v = random_matrix(rng, 4, 3);
  EXPECT_EQ(vmat(LoadingSet({v})), v);

  const LoadingSet ab({Matrix{{1}, {2}}, Matrix{{3}, {4}}});
  EXPECT_EQ(vmat(ab), (Matrix{{3}, {6}, {4}, {8}}));
}

TEST(Vmat, UnitColumnsStayUnit) {
  std::mt19937_64 rng(8);
  std::vector<Matrix> f;
  for (Eigen::Index d : {3, 4, 2}) {
    Matrix m = random_matrix(rng, d, 3);
    m.colwise().normalize();
    f.push_back(m);
  }
  const Matrix w = vmat(LoadingSet(f));
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_NEAR(w.col(r).norm(), 1.0, 1e-14);
}

TEST(Vmat, ColumnsAreVectorizedOuterProducts) {
  std::mt19937_64 rng(9);
  const LoadingSet l({random_matrix(rng, 3, 2), random_matrix(rng, 2, 2), random_matrix(rng, 4, 2)});
  const Matrix w = vmat(l);
  for (Eigen::Index r = 0; r < 2; ++r) {
    std::vector<Vector> vs{Vector::Ones(1)};
    for (const auto& f : l.factors) vs.push_back(f.col(r));
    const Matrix row = unfold(outer_product(vs), 0);
    EXPECT_EQ(Matrix(row.transpose()), Matrix(w.col(r)));
  }
}

TEST(CpCompose, Examples) {
  const MultiwayArray x = cp_compose(Matrix::Ones(1, 1), LoadingSet({Matrix{{1}, {0}}}));
  EXPECT_EQ(x.dims(), (Dims{1, 2}));
  EXPECT_EQ(x({0, 0}), 1.0);
  EXPECT_EQ(x({0, 1}), 0.0);

  std::mt19937_64 rng(10);
  const Matrix u = random_matrix(rng, 4, 3);
  const LoadingSet l({random_matrix(rng, 3, 3), random_matrix(rng, 5, 3)});
  const Matrix expected = u * vmat(l).transpose();
  EXPECT_LT((unfold(cp_compose(u, l), 0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CpCompose, LinearInScores) {
  std::mt19937_64 rng(12);
  const Matrix u1 = random_matrix(rng, 3, 2), u2 = random_matrix(rng, 3, 2);
  const LoadingSet l({random_matrix(rng, 4, 2), random_matrix(rng, 3, 2)});
  const MultiwayArray a = cp_compose(u1 + u2, l);
  const MultiwayArray b = cp_compose(u1, l), c = cp_compose(u2, l);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i] + c.data()[i], 1e-12);
}

TEST(Mttkrp, MatchesUnfoldTimesKhatriRao) {
  std::mt19937_64 rng(13);
  const MultiwayArray x = random_array(rng, {4, 3, 5, 2});
  std::vector<Matrix> f;
  for (std::size_t d : x.dims()) f.push_back(random_matrix(rng, static_cast<Eigen::Index>(d), 3));
  for (std::size_t k = 0; k < x.order(); ++k) {
    std::vector<Matrix> others;
    for (std::size_t j = 0; j < x.order(); ++j)
      if (j != k) others.push_back(f[j]);
    const Matrix expected = unfold(x, k) * khatri_rao(others);
    EXPECT_LT((mttkrp(x, f, k) - expected).cwiseAbs().maxCoeff(), 1e-11) << "mode " << k;
  }
}

TEST(FrobeniusDistance, Examples) {
  std::mt19937_64 rng(14);
  const MultiwayArray x = random_array(rng, {2, 3, 4});
  EXPECT_EQ(frobenius_distance(x, x), 0.0);
  EXPECT_EQ(frobenius_distance(MultiwayArray({2}, {1, 2}), MultiwayArray({2}, {1, 0})), 2.0);
  const MultiwayArray y = random_array(rng, {2, 3, 4});
  EXPECT_NEAR(frobenius_distance(x, y), (unfold(x, 0) - unfold(y, 0)).norm(), 1e-12);
  EXPECT_THROW(frobenius_distance(x, MultiwayArray({2, 3})), InvalidArgument);
}

TEST(KRank, Examples) {
  EXPECT_EQ(k_rank(Matrix::Identity(3, 3)), 3);
  EXPECT_EQ(k_rank(Matrix{{1, 1, 0}, {2, 2, 1}, {3, 3, 0}}), 1);
  EXPECT_EQ(k_rank(Matrix{{1, 0}, {2, 0}}), 0);
  EXPECT_THROW(k_rank(Matrix::Identity(21, 21)), InvalidArgument);
}

TEST(KRank, BoundedByRank) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index rows = 2 + trial % 5, cols = 1 + trial % 6;
    Matrix m = random_matrix(rng, rows, cols);
    if (trial % 3 == 0 && cols > 1) m.col(cols - 1) = m.col(0);
    const int kr = k_rank(m), rank = numerical_rank(m);
    EXPECT_LE(kr, rank);
    EXPECT_LE(rank, std::min(rows, cols));
  }
}

TEST(SignNormalize, UsesFirstNonzeroEntry) {
  Vector v{{0.0, -2.0, 1.0}};
  EXPECT_EQ(sign_normalize(v), -1.0);
  EXPECT_EQ(v, (Vector{{0.0, 2.0, -1.0}}));
}

TEST(FlattenSampleModes, SharesLinearization) {
  const MultiwayArray x = iota_array({2, 3, 4});
  const MultiwayArray flat = flatten_sample_modes(x);
  EXPECT_EQ(flat.dims(), (Dims{2, 12}));
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), flat.values().begin()));
}
