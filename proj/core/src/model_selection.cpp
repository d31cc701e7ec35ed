#include "supcp/model_selection.hpp"

#include "supcp/errors.hpp"
#include "supcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace supcp {

namespace {

Dataset take_samples(const Dataset& data, const std::vector<std::size_t>& rows) {
  const auto x1 = data.x.sample_matrix();
  Dims dims = data.x.dims();
  dims[0] = rows.size();
  MultiwayArray x(dims);
  auto out = x.sample_matrix();
  Matrix y(static_cast<Eigen::Index>(rows.size()), data.y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x1.row(static_cast<Eigen::Index>(rows[i]));
    y.row(static_cast<Eigen::Index>(i)) = data.y.row(static_cast<Eigen::Index>(rows[i]));
  }
  return {std::move(x), std::move(y)};
}

}  // namespace

TrainTestSplit train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  const std::size_t n = data.n_samples();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 2 || n - n_train < 2)
    throw InvalidArgument("train/test split leaves fewer than 2 samples on one side");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  TrainTestSplit split;
  split.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());

  auto [train, centering] = center(take_samples(data, split.train_indices));
  split.train = std::move(train);
  split.test = apply_centering(take_samples(data, split.test_indices), centering);
  split.centering = std::move(centering);
  return split;
}

double test_loglik(const Dataset& test, const SupCpParams& params) {
  return marginal_loglik(test.x, test.y, params);
}

RankSelectionReport select_rank(const Dataset& data, const std::vector<int>& candidate_ranks,
                                const FitConfig& fit_config, const SplitOptions& options,
                                unsigned jobs) {
  if (candidate_ranks.empty()) throw InvalidArgument("no candidate ranks");
  for (int r : candidate_ranks)
    if (r < 1) throw InvalidArgument("candidate ranks must be >= 1");

  RankSelectionReport report;
  report.candidate_ranks = candidate_ranks;
  report.split_seed = options.seed;
  report.train_fraction = options.train_fraction;

  const TrainTestSplit split = train_test_split(data, options.train_fraction, options.seed);
  const std::size_t count = candidate_ranks.size();
  report.test_logliks.assign(count, std::nullopt);
  report.train_logliks.assign(count, std::nullopt);
  std::vector<std::string> errors(count);

  parallel_for(count, resolve_jobs(jobs), [&](std::size_t i) {
    FitConfig cfg = fit_config;
    cfg.rank = candidate_ranks[i];
    try {
      const FitResult fitted = fit(split.train.x, split.train.y, cfg);
      // The training part is centered already, so the fit's own centering
      // is numerically zero and the parameters apply to the test part as is.
      report.train_logliks[i] = marginal_loglik(split.train.x, split.train.y, fitted.params);
      report.test_logliks[i] = test_loglik(split.test, fitted.params);
    } catch (const std::exception& e) {
      errors[i] = "rank " + std::to_string(candidate_ranks[i]) + ": " + e.what();
    }
  });
  for (auto& e : errors)
    if (!e.empty()) report.failures.push_back(std::move(e));

  if (count == 1) {
    report.chosen_rank = candidate_ranks.front();
    return report;
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < count; ++i) {
    if (!report.test_logliks[i]) continue;
    if (!best || *report.test_logliks[i] > *report.test_logliks[*best]) best = i;
  }
  if (!best) throw NumericalError("rank selection failed for every candidate rank");
  report.chosen_rank = candidate_ranks[*best];
  return report;
}

}  // namespace supcp
