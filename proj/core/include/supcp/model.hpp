#pragma once

#include "supcp/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace supcp {

/// Samples-first data array with its covariate matrix (one row per sample).
struct Dataset {
  MultiwayArray x;
  Matrix y;

  std::size_t n_samples() const { return x.dim(0); }
};

/// Column means removed from a dataset before fitting.
struct Centering {
  Vector x_mean;  ///< length d, same linearization as a sample's entries
  Vector y_mean;  ///< length q
};

/// Subtract per-entry sample means from x and per-column means from y.
std::pair<Dataset, Centering> center(const Dataset& data);

/// Apply previously computed means (e.g. training-set means to a test set).
Dataset apply_centering(const Dataset& data, const Centering& centering);

/// SupCP parameters {V_1..V_K, B, Sigma_f, sigma_e^2}.
///
/// After normalize(), loading columns have unit norm and a positive first
/// nonzero entry, and diag(sigma_f) is nonincreasing.
struct SupCpParams {
  LoadingSet loadings;
  Matrix b;        ///< q x R
  Matrix sigma_f;  ///< R x R, symmetric PSD
  double sigma_e2 = 1.0;
  bool diag_constraint = true;

  Eigen::Index rank() const noexcept { return loadings.rank(); }

  /// Throws InvalidParameter for a non-PSD sigma_f (eigenvalue below -1e-10),
  /// nonpositive sigma_e2, or inconsistent shapes.
  void validate() const;
};

/// Posterior of the latent scores given data and parameters.
struct EStepResult {
  Matrix u_hat;    ///< n x R posterior means
  Matrix sigma_u;  ///< R x R posterior covariance, shared by all samples
  /// Sigma_f was numerically singular (min eigenvalue < 1e-12 * max).
  bool degenerate_sigma_f = false;
};

enum class InitMethod { random, cp };

struct FitConfig {
  int rank = 1;
  int max_iters = 1000;
  /// Relative change in marginal log-likelihood that ends the iteration.
  double tol = 1e-8;
  /// Number of leading iterations with annealing noise on the scores.
  int anneal_iters = 100;
  /// Annealing noise at iteration l has sd anneal_scale * sigma_e / l.
  double anneal_scale = 1.0;
  InitMethod init = InitMethod::random;
  /// One run per seed; the highest final log-likelihood wins.
  std::vector<std::uint64_t> seeds{0};
  bool diag_sigma_f = true;
  /// Iteration cap for the ALS initializer.
  int cp_max_iters = 500;

  void validate() const;
};

struct FitResult {
  SupCpParams params;
  EStepResult e_step;
  std::vector<double> loglik_trace;
  bool converged = false;
  int n_iters = 0;
  std::uint64_t seed = 0;
  /// Final log-likelihood of every seed, in FitConfig::seeds order.
  std::vector<double> seed_logliks;
  Centering centering;
  std::vector<std::string> diagnostics;

  double final_loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }

  /// Estimated low-rank signal [[U_hat, V_1, ..., V_K]] in centered units.
  MultiwayArray signal() const { return cp_compose(e_step.u_hat, params.loadings); }
};

/// Exact Gaussian log-density of the sample-mode unfolding, rows iid
/// N(V B^T y_i, V Sigma_f V^T + sigma_e^2 I), V = vmat(loadings). Uses the
/// Woodbury identity and matrix determinant lemma: O(ndR + R^3).
double marginal_loglik(const MultiwayArray& x, const Matrix& y, const SupCpParams& params);

/// Starting parameters plus the initial score matrix.
struct Initialization {
  SupCpParams params;
  Matrix u;
};

Initialization initialize(const MultiwayArray& x, const Matrix& y, const FitConfig& config,
                          std::uint64_t seed);

/// Conditional mean and covariance of the scores. Computed through
/// Sigma_f^{1/2}, so a singular Sigma_f needs no inverse.
EStepResult e_step(const MultiwayArray& x, const Matrix& y, const SupCpParams& params);

/// Loading update for modes in ascending order, each using the already
/// updated earlier modes. Returned loadings are not normalized.
LoadingSet m_step_loadings(const MultiwayArray& x, const EStepResult& posterior,
                           const SupCpParams& params,
                           std::vector<std::string>* diagnostics = nullptr);

struct RegressionUpdate {
  Matrix b;
  Matrix sigma_f;
  double sigma_e2 = 0.0;
  std::vector<std::string> diagnostics;
};

/// Updates B (least squares of U_hat on y), Sigma_f and sigma_e^2 given the
/// posterior and the (unnormalized) loadings from m_step_loadings.
RegressionUpdate m_step_regression(const MultiwayArray& x, const Matrix& y,
                                   const EStepResult& posterior, const LoadingSet& loadings,
                                   bool diag_sigma_f);

/// Posterior expectation of ||X1 - U V^T||_F^2 with U rows ~ N(U_hat_i, Sigma_U).
double expected_residual_ss(const MultiwayArray& x, const EStepResult& posterior,
                            const LoadingSet& loadings);

/// Rescale loading columns to unit norm with a positive leading entry,
/// compensating in B and Sigma_f, then sort components by decreasing
/// diag(Sigma_f) (stable). Leaves the marginal likelihood unchanged.
SupCpParams normalize(SupCpParams params);

/// Maximum-likelihood EM fit. x and y are centered internally; the means are
/// returned in FitResult::centering.
FitResult fit(const MultiwayArray& x, const Matrix& y, const FitConfig& config);

struct IdentifiabilityReport {
  bool satisfied = false;
  int margin = 0;
  int kr_yb = 0;
  std::vector<int> kr_loadings;
  bool y_full_column_rank = false;
};

/// Sufficient identifiability condition
/// kr(Y B) + sum_k kr(V_k) >= 2R + K with Y of full column rank.
IdentifiabilityReport identifiability_check(const SupCpParams& params, const Matrix& y);

/// Conditional mean [[y^T B, V_1, ..., V_K]] for a centered covariate vector,
/// as a 1 x d_1 x ... x d_K array.
MultiwayArray conditional_mean(const Vector& y_new, const SupCpParams& params);

}  // namespace supcp
