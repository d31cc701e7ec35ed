#include "oracles.hpp"

#include "supcp/cp_als.hpp"
#include "supcp/errors.hpp"
#include "supcp/model.hpp"
#include "supcp/simulation.hpp"

#include <gtest/gtest.h>

using namespace supcp;
using namespace supcp::testing;

namespace {

Dataset small_supervised(std::uint64_t seed, std::size_t n = 30) {
  std::mt19937_64 rng(seed);
  const Eigen::Index r = 2;
  const Matrix y = random_matrix(rng, static_cast<Eigen::Index>(n), 2);
  const Matrix b = random_matrix(rng, 2, r) * 2.0;
  const Matrix u = y * b + random_matrix(rng, static_cast<Eigen::Index>(n), r);
  std::vector<Matrix> f{random_matrix(rng, 6, r), random_matrix(rng, 5, r)};
  for (auto& v : f) v.colwise().normalize();
  MultiwayArray x = cp_compose(u, LoadingSet(f));
  std::normal_distribution<double> normal;
  for (auto& v : x.values()) v += 0.5 * normal(rng);
  return {std::move(x), y};
}

FitConfig quick_config(int rank = 2) {
  FitConfig cfg;
  cfg.rank = rank;
  cfg.max_iters = 300;
  cfg.anneal_iters = 10;
  cfg.seeds = {7};
  return cfg;
}

}  // namespace

TEST(Initialize, ZeroCovariatesGiveDiagonalScoreMoment) {
  const Dataset data = small_supervised(1);
  const Matrix y0 = Matrix::Zero(data.y.rows(), 2);
  const Initialization init = initialize(data.x, y0, quick_config(), 3);
  EXPECT_TRUE(init.params.b.isZero(0.0));
  Vector expected = (init.u.transpose() * init.u / 30.0).diagonal();
  std::sort(expected.data(), expected.data() + expected.size(), std::greater<>());
  EXPECT_LT((init.params.sigma_f.diagonal() - expected).cwiseAbs().maxCoeff(), 1e-10 * expected.maxCoeff());
}

TEST(Initialize, NoiselessRankOneCpStartHasNoResidual) {
  std::mt19937_64 rng(2);
  const MultiwayArray x = cp_compose(random_matrix(rng, 8, 1),
                                     LoadingSet({random_matrix(rng, 4, 1), random_matrix(rng, 3, 1)}));
  FitConfig cfg = quick_config(1);
  cfg.init = InitMethod::cp;
  const Initialization init = initialize(x, random_matrix(rng, 8, 1), cfg, 0);
  EXPECT_LT(init.params.sigma_e2, 1e-12);
}

TEST(Initialize, RandomStartIsReproducible) {
  const Dataset data = small_supervised(3);
  const Initialization a = initialize(data.x, data.y, quick_config(), 11);
  const Initialization b = initialize(data.x, data.y, quick_config(), 11);
  EXPECT_EQ(a.params.loadings.factors, b.params.loadings.factors);
  EXPECT_EQ(a.params.b, b.params.b);
  EXPECT_EQ(a.params.sigma_f, b.params.sigma_f);
  EXPECT_EQ(a.params.sigma_e2, b.params.sigma_e2);
}

TEST(Fit, DeterministicTrace) {
  const Dataset data = small_supervised(4);
  const FitResult a = fit(data.x, data.y, quick_config());
  const FitResult b = fit(data.x, data.y, quick_config());
  EXPECT_EQ(a.loglik_trace, b.loglik_trace);
}

TEST(Fit, MonotoneAfterAnnealing) {
  for (std::uint64_t seed = 5; seed < 10; ++seed) {
    const Dataset data = small_supervised(seed);
    FitConfig cfg = quick_config();
    cfg.diag_sigma_f = seed % 2 == 0;
    const FitResult res = fit(data.x, data.y, cfg);
    for (std::size_t l = static_cast<std::size_t>(cfg.anneal_iters) + 1; l < res.loglik_trace.size(); ++l)
      EXPECT_GE(res.loglik_trace[l], res.loglik_trace[l - 1] - 1e-6) << "seed " << seed << " iteration " << l;
  }
}

TEST(Fit, FinalParametersSatisfyRestrictions) {
  const Dataset data = small_supervised(10);
  const FitResult res = fit(data.x, data.y, quick_config());
  EXPECT_TRUE(res.params.loadings.is_normalized(1e-12));
  const Vector diag = res.params.sigma_f.diagonal();
  for (Eigen::Index r = 1; r < diag.size(); ++r) EXPECT_GE(diag(r - 1), diag(r));
  EXPECT_TRUE(res.params.sigma_f.isDiagonal(0.0));
}

TEST(Fit, CenteringMakesFitShiftInvariant) {
  const Dataset data = small_supervised(11);
  Dataset shifted = data;
  shifted.x.sample_matrix().col(3).array() += 5.0;
  shifted.y.col(1).array() -= 2.0;
  const FitResult a = fit(data.x, data.y, quick_config());
  const FitResult b = fit(shifted.x, shifted.y, quick_config());
  ASSERT_EQ(a.loglik_trace.size(), b.loglik_trace.size());
  for (std::size_t i = 0; i < a.loglik_trace.size(); ++i)
    EXPECT_NEAR(a.loglik_trace[i], b.loglik_trace[i], 1e-8 * std::abs(a.loglik_trace[i]));
  EXPECT_NEAR(b.centering.x_mean(3) - a.centering.x_mean(3), 5.0, 1e-12);
}

TEST(Fit, MultiStartKeepsBestSeed) {
  const Dataset data = small_supervised(12);
  FitConfig cfg = quick_config();
  cfg.seeds = {1, 2, 3};
  const FitResult res = fit(data.x, data.y, cfg);
  ASSERT_EQ(res.seed_logliks.size(), 3u);
  EXPECT_EQ(res.final_loglik(), *std::max_element(res.seed_logliks.begin(), res.seed_logliks.end()));
}

TEST(Fit, RejectsCollinearCovariates) {
  Dataset data = small_supervised(13);
  data.y.col(1) = 3.0 * data.y.col(0);
  EXPECT_THROW(fit(data.x, data.y, quick_config()), InvalidArgument);
}

TEST(Fit, RejectsBadConfig) {
  const Dataset data = small_supervised(14);
  FitConfig cfg = quick_config();
  cfg.anneal_iters = cfg.max_iters;
  EXPECT_THROW(fit(data.x, data.y, cfg), InvalidArgument);
  cfg = quick_config();
  cfg.seeds.clear();
  EXPECT_THROW(fit(data.x, data.y, cfg), InvalidArgument);
  cfg = quick_config();
  cfg.anneal_scale = -1.0;
  EXPECT_THROW(fit(data.x, data.y, cfg), InvalidArgument);
}

TEST(Fit, ZeroAnnealScaleFollowsPlainEm) {
  const Dataset data = small_supervised(15);
  FitConfig noisy = quick_config();
  noisy.anneal_scale = 0.0;
  FitConfig plain = noisy;
  plain.anneal_iters = 0;
  plain.tol = 1e-300;
  const FitResult a = fit(data.x, data.y, noisy);
  const FitResult b = fit(data.x, data.y, plain);
  for (int l = 0; l < noisy.anneal_iters; ++l) EXPECT_EQ(a.loglik_trace[l], b.loglik_trace[l]) << l;
}

TEST(Fit, AnnealScaleChangesEarlyIterations) {
  const Dataset data = small_supervised(16);
  FitConfig weak = quick_config();
  FitConfig strong = weak;
  strong.anneal_scale = 5.0;
  EXPECT_NE(fit(data.x, data.y, weak).loglik_trace[0], fit(data.x, data.y, strong).loglik_trace[0]);
}

TEST(Fit, RecoversPlantedSignal) {
  const Dataset data = small_supervised(15, 60);
  FitConfig cfg = quick_config();
  cfg.max_iters = 1000;
  const FitResult res = fit(data.x, data.y, cfg);
  // Noise variance is 0.25; the estimate lands close to it.
  EXPECT_NEAR(res.params.sigma_e2, 0.25, 0.05);
}

TEST(Fit, FullSigmaFOption) {
  const Dataset data = small_supervised(16);
  FitConfig cfg = quick_config();
  cfg.diag_sigma_f = false;
  const FitResult res = fit(data.x, data.y, cfg);
  EXPECT_FALSE(res.params.diag_constraint);
  EXPECT_NO_THROW(res.params.validate());
}

// With Sigma_f pinned far above the noise, updating only loadings and
// sigma_e^2 reproduces least-squares CP on noiseless data.
TEST(LimitBehavior, LargeFixedSigmaFMatchesCp) {
  std::mt19937_64 rng(17);
  const Matrix u = random_matrix(rng, 20, 2) * 3.0;
  std::vector<Matrix> f{random_matrix(rng, 6, 2), random_matrix(rng, 5, 2)};
  const MultiwayArray x = cp_compose(u, LoadingSet(f));
  const Matrix y = Matrix::Zero(20, 1);

  CpConfig cp_cfg;
  cp_cfg.rank = 2;
  cp_cfg.max_iters = 2000;
  cp_cfg.tol = 1e-14;
  const CpFit cp = cp_fit_als(x, cp_cfg);

  SupCpParams p;
  p.loadings = LoadingSet({random_matrix(rng, 6, 2), random_matrix(rng, 5, 2)});
  p.b = Matrix::Zero(1, 2);
  p.sigma_e2 = 1.0;
  for (int iter = 0; iter < 3000; ++iter) {
    p.sigma_f = 1e6 * p.sigma_e2 * Matrix::Identity(2, 2);
    const EStepResult post = e_step(x, y, p);
    p.loadings = m_step_loadings(x, post, p);
    p.sigma_e2 = std::max(1e-12, expected_residual_ss(x, post, p.loadings) / (20.0 * 30.0));
    for (auto& v : p.loadings.factors) v.colwise().normalize();
  }
  const EStepResult post = e_step(x, y, p);
  const MultiwayArray signal = cp_compose(post.u_hat, p.loadings);
  EXPECT_LT(frobenius_distance(signal, cp.signal()) / cp.signal().frobenius_norm(), 0.01);
}

TEST(LimitBehavior, ZeroCovariatesTrackCp) {
  const SimData sim = generate_setting(1, 101);
  const auto [centered, c] = center(sim.data);
  FitConfig cfg;
  cfg.rank = 5;
  cfg.init = InitMethod::cp;
  cfg.anneal_iters = 0;
  cfg.seeds = {5};
  const FitResult res = fit(centered.x, Matrix::Zero(100, 10), cfg);
  CpConfig cp_cfg;
  cp_cfg.rank = 5;
  cp_cfg.seed = 5;
  const CpFit cp = cp_fit_als(centered.x, cp_cfg);
  EXPECT_LT(frobenius_distance(res.signal(), cp.signal()) / cp.signal().frobenius_norm(), 0.05);
}
