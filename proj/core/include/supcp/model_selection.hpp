#pragma once

#include "supcp/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace supcp {

struct TrainTestSplit {
  Dataset train;  ///< centered with training means
  Dataset test;   ///< centered with the same training means
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  Centering centering;
};

/// Uniform random partition of the samples without replacement. The training
/// size is round(train_fraction * n); both parts need >= 2 samples.
TrainTestSplit train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Marginal log-likelihood of an already-centered held-out set.
double test_loglik(const Dataset& test, const SupCpParams& params);

struct RankSelectionReport {
  std::vector<int> candidate_ranks;
  /// Missing where the fit for that rank failed.
  std::vector<std::optional<double>> test_logliks;
  std::vector<std::optional<double>> train_logliks;
  std::vector<std::string> failures;
  int chosen_rank = 0;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.5;
};

struct SplitOptions {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

/// Likelihood cross-validation: fit every candidate on the training part and
/// keep the rank with the highest held-out log-likelihood. `jobs` > 1 fits
/// candidates concurrently; the report does not depend on it.
RankSelectionReport select_rank(const Dataset& data, const std::vector<int>& candidate_ranks,
                                const FitConfig& fit_config, const SplitOptions& split,
                                unsigned jobs = 1);

}  // namespace supcp
