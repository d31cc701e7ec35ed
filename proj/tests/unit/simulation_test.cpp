#include "oracles.hpp"

#include "supcp/errors.hpp"
#include "supcp/simulation.hpp"

#include <gtest/gtest.h>

using namespace supcp;

namespace {

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Generators, SignalIsComposedTruth) {
  for (int s = 1; s <= 4; ++s) {
    const SimData sim = generate_setting(s, 5);
    EXPECT_EQ(frobenius_distance(cp_compose(sim.truth.u, sim.truth.loadings), sim.truth.signal), 0.0);
  }
  const SimData rank = generate_rank_sim(3, 5);
  EXPECT_EQ(frobenius_distance(cp_compose(rank.truth.u, rank.truth.loadings), rank.truth.signal), 0.0);
}

TEST(Generators, DeterministicPerSeed) {
  EXPECT_EQ(generate_setting(2, 9).data.x, generate_setting(2, 9).data.x);
  EXPECT_EQ(generate_rank_sim(4, 9).data.y, generate_rank_sim(4, 9).data.y);
  EXPECT_FALSE(generate_setting(2, 9).data.x == generate_setting(2, 10).data.x);
}

TEST(Generators, SettingParameters) {
  const SimData s1 = generate_setting(1, 1);
  EXPECT_EQ(s1.data.x.dims(), (Dims{100, 10, 10}));
  EXPECT_EQ(s1.data.y.cols(), 10);
  EXPECT_EQ(s1.truth.sigma_f.diagonal(), (Vector{{100, 64, 36, 16, 4}}));
  EXPECT_EQ(s1.truth.sigma_e2, 1.0);
  EXPECT_TRUE(s1.truth.b.isZero(0.0));

  const SimData s3 = generate_setting(3, 1);
  EXPECT_TRUE(s3.truth.sigma_f.isZero(0.0));
  EXPECT_EQ(s3.truth.sigma_e2, 6.0);

  const SimData s4 = generate_setting(4, 1);
  EXPECT_EQ(s4.data.x.dims(), (Dims{100, 50, 50}));
  EXPECT_EQ(s4.truth.sigma_e2, 0.5);
  EXPECT_THROW(generate_setting(5, 1), InvalidArgument);
}

TEST(Generators, SettingTwoSignalToNoise) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SimData s = generate_setting(2, seed);
    const Matrix yb = s.truth.y * s.truth.b;
    const Matrix f = s.truth.u - yb;
    const double ratio = yb.norm() / f.norm();
    EXPECT_GE(ratio, 0.8);
    EXPECT_LE(ratio, 1.25);
  }
}

TEST(Generators, SettingTwoCollinearLoadings) {
  const SimData s = generate_setting(2, 3);
  for (const auto& v : s.truth.loadings.factors) {
    const Matrix gram = v.transpose() * v;
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_NEAR(gram(i, i), 1.0, 1e-12);
      for (Eigen::Index j = 0; j < i; ++j) EXPECT_GE(gram(i, j), 0.9);
    }
  }
}

TEST(Generators, RankSimulation) {
  const SimData s = generate_rank_sim(1, 4);
  EXPECT_EQ(s.data.x.dims(), (Dims{100, 25, 25}));
  const Eigen::JacobiSVD<Matrix> svd(unfold(s.data.x, 0));
  // One signal direction separates from the noise bulk.
  const Vector sv = svd.singularValues();
  EXPECT_GT(sv(0) - sv(1), 10.0 * (sv(1) - sv(2)));

  const SimData s7 = generate_rank_sim(7, 4);
  for (Eigen::Index i = 0; i < 7; ++i) {
    EXPECT_GE(s7.truth.sigma_f(i, i), 5.0);
    EXPECT_LE(s7.truth.sigma_f(i, i), 25.0);
  }
  for (const auto& v : s7.truth.loadings.factors)
    EXPECT_LT(max_abs(v.transpose() * v - Matrix::Identity(7, 7)), 1e-12);
}

TEST(Generators, InitSimulation) {
  std::vector<double> corr;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimData s = generate_init_sim(seed);
    EXPECT_EQ(s.data.x.dims(), (Dims{10, 20, 40, 50}));
    for (const auto& v : s.truth.loadings.factors)
      EXPECT_LT((v.colwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
    const Vector y = s.data.y.col(0), u1 = s.truth.u.col(0);
    corr.push_back(y.dot(u1) / (y.norm() * u1.norm()));
  }
  EXPECT_GT(median(corr), 0.7);
}

TEST(Metrics, PrincipalAngleExamples) {
  const Matrix e1 = Matrix::Identity(3, 1);
  Matrix e2 = Matrix::Zero(3, 1);
  e2(1, 0) = 1.0;
  EXPECT_NEAR(principal_angle(e1, e1), 0.0, 1e-12);
  EXPECT_NEAR(principal_angle(e1, e2), 90.0, 1e-12);
  EXPECT_NEAR(principal_angle(e1, (e1 + e2) / std::sqrt(2.0)), 45.0, 1e-10);
  // Rank-deficient input uses its numerical column space.
  Matrix dup(3, 2);
  dup << e1, e1;
  EXPECT_NEAR(principal_angle(dup, e1), 0.0, 1e-12);
}

TEST(Metrics, SignalErrorBounds) {
  const SimData s = generate_setting(1, 2);
  EXPECT_EQ(signal_error(s.truth.signal, s.truth.signal), 0.0);
  const MultiwayArray other = generate_setting(1, 3).truth.signal;
  const double se = signal_error(other, s.truth.signal);
  EXPECT_LE(se * se, 2.0 * std::pow(s.truth.signal.frobenius_norm(), 2) + 2.0 * std::pow(other.frobenius_norm(), 2));
}

TEST(Metrics, RelativeErrorsExactAndPermuted) {
  const SimData s = generate_setting(2, 4);
  const Matrix v = vmat(s.truth.loadings);
  RelativeErrors re = relative_errors(v, s.truth.b, s.truth.sigma_f, s.truth.sigma_e2, s.truth);
  EXPECT_EQ(re.re_e, 0.0);
  ASSERT_TRUE(re.re_f.has_value());
  EXPECT_NEAR(*re.re_f, 0.0, 1e-15);
  EXPECT_NEAR(re.b_error, 0.0, 1e-12);

  // Swap two components and flip one sign.
  std::vector<Eigen::Index> perm{1, 0, 2, 3, 4};
  Matrix vp(v.rows(), 5), bp(s.truth.b.rows(), 5), sf = Matrix::Zero(5, 5);
  for (Eigen::Index r = 0; r < 5; ++r) {
    const double sign = r == 2 ? -1.0 : 1.0;
    vp.col(r) = sign * v.col(perm[r]);
    bp.col(r) = sign * s.truth.b.col(perm[r]);
    sf(r, r) = s.truth.sigma_f(perm[r], perm[r]);
  }
  re = relative_errors(vp, bp, sf, s.truth.sigma_e2, s.truth);
  EXPECT_NEAR(*re.re_f, 0.0, 1e-15);
  EXPECT_NEAR(re.b_error, 0.0, 1e-12);
}

TEST(Metrics, SettingThreeHasNoSigmaFError) {
  const SimData s = generate_setting(3, 4);
  const RelativeErrors re =
      relative_errors(vmat(s.truth.loadings), s.truth.b, Matrix::Identity(5, 5), 7.5, s.truth);
  EXPECT_FALSE(re.re_f.has_value());
  EXPECT_NEAR(re.re_e, 0.25, 1e-15);
}

TEST(Metrics, MedianAndMad) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median_absolute_deviation({1.0, 2.0, 3.0, 4.0, 100.0}), 1.0);
  EXPECT_EQ(median_absolute_deviation({5.0}), 0.0);
}

TEST(Benchmark, RowsAndSingleRunMad) {
  BenchmarkConfig cfg;
  cfg.setting = 3;
  cfg.n_runs = 1;
  cfg.fit.max_iters = 200;
  cfg.fit.anneal_iters = 10;
  const BenchmarkReport rep = run_benchmark(cfg);
  // supcp: SE, 2 angles, B, RE_e, time; cp: SE, 2 angles, time; supsvd: SE, B, RE_e, time.
  EXPECT_EQ(rep.rows.size(), 6u + 4u + 4u);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.mad, 0.0);
    EXPECT_EQ(row.n_runs, 1);
  }
}

TEST(Benchmark, IndependentOfJobs) {
  BenchmarkConfig cfg;
  cfg.setting = 1;
  cfg.n_runs = 3;
  cfg.methods = {Method::supcp, Method::cp};
  cfg.fit.max_iters = 100;
  cfg.fit.anneal_iters = 5;
  cfg.jobs = 1;
  const BenchmarkReport a = run_benchmark(cfg);
  cfg.jobs = 3;
  const BenchmarkReport b = run_benchmark(cfg);
  EXPECT_EQ(a.samples.at("supcp").at("SE"), b.samples.at("supcp").at("SE"));
  EXPECT_EQ(a.samples.at("cp").at("angle_V1"), b.samples.at("cp").at("angle_V1"));
}

TEST(Benchmark, RejectsZeroStarts) {
  BenchmarkConfig cfg;
  cfg.n_runs = 1;
  cfg.n_starts = 0;
  EXPECT_THROW(run_benchmark(cfg), InvalidArgument);
  cfg.n_starts = 1;
  cfg.cp_n_starts = 0;
  EXPECT_THROW(run_benchmark(cfg), InvalidArgument);
}

TEST(InitStudy, SameSeedsReproduce) {
  InitStudyConfig cfg;
  cfg.n_datasets = 1;
  cfg.variants = {{InitMethod::random, 0}};
  cfg.post_anneal_iters = 30;
  const auto a = run_init_study(cfg);
  const auto b = run_init_study(cfg);
  EXPECT_EQ(a[0].mean_loglik, b[0].mean_loglik);
  EXPECT_EQ(a[0].differences, b[0].differences);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::supcp, Method::cp, Method::supsvd}) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("pca"), InvalidArgument);
}
