#pragma once

#include "supcp/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace supcp {

/// Ground truth kept by the generators for metric computation.
struct SimTruth {
  Matrix u;
  LoadingSet loadings;
  Matrix b;
  Matrix sigma_f;
  double sigma_e2 = 1.0;
  MultiwayArray signal;  ///< cp_compose(u, loadings)
  Matrix y;

  SupCpParams params() const;
};

struct SimData {
  Dataset data;
  SimTruth truth;
};

/// Table-1 simulation settings 1-4 (n = 100, q = 10, R = 5).
///
/// Y and F are column-centered so the true signal is centered like the data
/// the estimators see.
SimData generate_setting(int setting, std::uint64_t seed);

/// Rank-selection study: n = 100, 25 x 25, q = 10, true rank 1..10.
SimData generate_rank_sim(int true_rank, std::uint64_t seed);

/// Initialization study: 10 x 20 x 40 x 50 array, R = 2, one covariate
/// correlated with the first score column.
SimData generate_init_sim(std::uint64_t seed);

// ---- metrics ---------------------------------------------------------------

/// Frobenius distance between estimated and true signal arrays (SE).
double signal_error(const MultiwayArray& fitted, const MultiwayArray& truth);

/// Largest principal angle between the column spaces, in degrees.
double principal_angle(const Matrix& v, const Matrix& v_hat);

struct RelativeErrors {
  double re_e = 0.0;
  std::optional<double> re_f;  ///< missing when the true Sigma_f is zero
  double b_error = 0.0;
};

/// Component-aligned parameter errors. Estimated components are matched to
/// the truth greedily by largest |cosine| between vmat columns, and signs are
/// matched before the B error is taken. `estimated_vmat` lets a flattened
/// (single-mode) fit be compared with a multiway truth.
RelativeErrors relative_errors(const Matrix& estimated_vmat, const Matrix& b_hat,
                               const Matrix& sigma_f_hat, double sigma_e2_hat,
                               const SimTruth& truth);

/// Greedy |cosine| matching: entry t is the estimated column assigned to
/// true column t, with the sign that best aligns them.
struct ComponentMatch {
  std::vector<Eigen::Index> estimated_for_truth;
  std::vector<double> sign;
};
ComponentMatch align_components(const Matrix& truth_vmat, const Matrix& estimated_vmat);

// ---- benchmark harness -----------------------------------------------------

enum class Method { supcp, cp, supsvd };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct BenchmarkRow {
  Method method = Method::supcp;
  std::string metric;
  double median = 0.0;
  double mad = 0.0;
  int n_runs = 0;
};

struct BenchmarkConfig {
  int setting = 1;
  int n_runs = 100;
  std::vector<Method> methods{Method::supcp, Method::cp, Method::supsvd};
  std::uint64_t seed = 0;
  FitConfig fit;       ///< rank is overridden with the true rank
  int cp_max_iters = 500;
  double cp_tol = 1e-8;
  /// Starts per SupCP / SupSVD fit; the highest likelihood is kept.
  int n_starts = 5;
  /// Starts per CP fit; the lowest residual is kept.
  int cp_n_starts = 1;
  unsigned jobs = 1;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  /// Per-method raw metric values, one entry per successful run.
  std::map<std::string, std::map<std::string, std::vector<double>>> samples;
  std::map<std::string, int> failures;
  std::vector<std::string> failure_messages;
};

double median(std::vector<double> values);
/// Median absolute deviation from the median (unscaled).
double median_absolute_deviation(const std::vector<double>& values);

/// Replicates one Table-1 setting. Per run and method it records SE, the
/// per-mode principal angles (supcp, cp), B error, RE_e and RE_f (supcp,
/// supsvd) and wall-clock seconds, then reports median and MAD of each.
/// Replicate r uses generator seed derived from (seed, r).
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

struct InitVariant {
  InitMethod init = InitMethod::random;
  int anneal_iters = 0;
  std::string label() const;
};

struct InitStudyRow {
  InitVariant variant;
  double mean_loglik = 0.0;
  double sd_loglik = 0.0;
  double mean_abs_difference = 0.0;
  double sd_abs_difference = 0.0;
  double mean_seconds = 0.0;
  double sd_seconds = 0.0;
  int n_datasets = 0;
  /// Per dataset |loglik(run 1) - loglik(run 2)|.
  std::vector<double> differences;
};

struct InitStudyConfig {
  int n_datasets = 100;
  std::vector<InitVariant> variants{
      {InitMethod::random, 0},  {InitMethod::random, 100}, {InitMethod::random, 500},
      {InitMethod::cp, 0},      {InitMethod::cp, 100},     {InitMethod::cp, 500}};
  std::uint64_t seed = 0;
  /// Iterations allowed after the annealing phase.
  int post_anneal_iters = 1000;
  double anneal_scale = 1.0;
  double tol = 1e-8;
  unsigned jobs = 1;
};

/// Runs every variant twice (different seeds) on each simulated dataset and
/// summarizes final log-likelihood, between-run disagreement and time.
std::vector<InitStudyRow> run_init_study(const InitStudyConfig& config);

/// Seed for replicate `index` of a study seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace supcp
