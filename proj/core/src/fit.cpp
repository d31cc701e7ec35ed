#include "linalg.hpp"
#include "supcp/cp_als.hpp"
#include "supcp/errors.hpp"
#include "supcp/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace supcp {

namespace {

Matrix least_squares_coefficients(const Matrix& y, const Matrix& u) {
  if (y.cols() == 0 || y.isZero(0.0)) return Matrix::Zero(y.cols(), u.cols());
  Eigen::ColPivHouseholderQR<Matrix> qr(y);
  if (qr.rank() < y.cols())
    throw InvalidArgument("covariate matrix is not of full column rank; remove collinear covariates");
  return qr.solve(u);
}

struct SingleRun {
  SupCpParams params;
  std::vector<double> trace;
  bool converged = false;
  int n_iters = 0;
  std::vector<std::string> diagnostics;
};

SingleRun run_em(const MultiwayArray& x, const Matrix& y, const FitConfig& config,
                 std::uint64_t seed) {
  SingleRun run;
  Initialization init = initialize(x, y, config, seed);
  run.params = std::move(init.params);

  // Annealing noise draws from its own stream so the initializer and the
  // annealing schedule stay independent of each other.
  std::mt19937_64 anneal_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;

  double previous = marginal_loglik(x, y, run.params);
  bool warned_degenerate = false;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    EStepResult post = e_step(x, y, run.params);
    if (post.degenerate_sigma_f && !warned_degenerate) {
      run.diagnostics.push_back("iteration " + std::to_string(iter) +
                                ": Sigma_f numerically singular");
      warned_degenerate = true;
    }
    if (iter <= config.anneal_iters) {
      const double sd = config.anneal_scale * std::sqrt(run.params.sigma_e2) / iter;
      for (Eigen::Index i = 0; i < post.u_hat.size(); ++i) post.u_hat.data()[i] += sd * normal(anneal_rng);
    }

    SupCpParams next;
    next.diag_constraint = config.diag_sigma_f;
    next.loadings = m_step_loadings(x, post, run.params, &run.diagnostics);
    RegressionUpdate reg = m_step_regression(x, y, post, next.loadings, config.diag_sigma_f);
    for (auto& msg : reg.diagnostics) run.diagnostics.push_back("iteration " + std::to_string(iter) + ": " + msg);
    next.b = std::move(reg.b);
    next.sigma_f = std::move(reg.sigma_f);
    next.sigma_e2 = reg.sigma_e2;
    run.params = normalize(std::move(next));

    const double ll = marginal_loglik(x, y, run.params);
    if (!std::isfinite(ll)) {
      std::ostringstream msg;
      msg << "non-finite log-likelihood at iteration " << iter << " (sigma_e^2 = "
          << run.params.sigma_e2 << ", diag Sigma_f = " << run.params.sigma_f.diagonal().transpose()
          << ")";
      throw NumericalError(msg.str());
    }
    run.trace.push_back(ll);
    run.n_iters = iter;
    if (iter > config.anneal_iters && std::abs(ll - previous) < config.tol * std::abs(previous)) {
      run.converged = true;
      break;
    }
    previous = ll;
  }
  return run;
}

}  // namespace

void FitConfig::validate() const {
  if (rank < 1) throw InvalidArgument("rank must be >= 1");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!(anneal_scale >= 0.0) || !std::isfinite(anneal_scale)) throw InvalidArgument("anneal_scale must be finite and >= 0");
  if (anneal_iters < 0 || anneal_iters >= max_iters)
    throw InvalidArgument("anneal_iters must be in [0, max_iters)");
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
}

Initialization initialize(const MultiwayArray& x, const Matrix& y, const FitConfig& config,
                          std::uint64_t seed) {
  config.validate();
  if (x.order() < 2) throw InvalidArgument("data array must have a sample mode plus >= 1 mode");
  if (static_cast<std::size_t>(y.rows()) != x.dim(0))
    throw InvalidArgument("covariate rows must equal the number of samples");
  const Eigen::Index rank = config.rank;
  const auto n = static_cast<double>(x.dim(0));

  Initialization init;
  SupCpParams& p = init.params;
  p.diag_constraint = config.diag_sigma_f;

  if (config.init == InitMethod::random) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<Matrix> factors;
    for (std::size_t k = 1; k < x.order(); ++k) {
      Matrix v(static_cast<Eigen::Index>(x.dim(k)), rank);
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng);
      for (Eigen::Index c = 0; c < rank; ++c) {
        v.col(c).normalize();
        sign_normalize(v.col(c));
      }
      factors.push_back(std::move(v));
    }
    p.loadings = LoadingSet(std::move(factors));
    init.u = x.sample_matrix() * vmat(p.loadings);
  } else {
    CpConfig cp;
    cp.rank = config.rank;
    cp.max_iters = config.cp_max_iters;
    cp.seed = seed;
    CpFit fitted = cp_fit_als(x, cp);
    p.loadings = std::move(fitted.loadings);
    init.u = std::move(fitted.u);
  }

  p.b = least_squares_coefficients(y, init.u);

  const MultiwayArray fitted = cp_compose(init.u, p.loadings);
  const std::size_t count = x.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < count; ++i) mean += x.data()[i] - fitted.data()[i];
  mean /= static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double dev = x.data()[i] - fitted.data()[i] - mean;
    ss += dev * dev;
  }
  p.sigma_e2 = count > 1 ? ss / static_cast<double>(count - 1) : ss;
  if (!(p.sigma_e2 > 0.0)) p.sigma_e2 = 1e-12;

  const Matrix f = init.u - y * p.b;
  p.sigma_f = Matrix((f.transpose() * f / n).diagonal().asDiagonal());
  p = normalize(std::move(p));
  return init;
}

FitResult fit(const MultiwayArray& x, const Matrix& y, const FitConfig& config) {
  config.validate();
  if (x.order() < 2) throw InvalidArgument("data array must have a sample mode plus >= 1 mode");
  if (x.dim(0) < 2) throw InvalidArgument("fit needs at least 2 samples");
  if (static_cast<std::size_t>(y.rows()) != x.dim(0))
    throw InvalidArgument("covariate rows must equal the number of samples");

  auto [data, centering] = center(Dataset{x, y});
  if (data.y.cols() > 0 && !data.y.isZero(0.0)) {
    Eigen::ColPivHouseholderQR<Matrix> qr(data.y);
    if (qr.rank() < data.y.cols())
      throw InvalidArgument(
          "centered covariate matrix is not of full column rank; remove collinear covariates");
  }

  FitResult best;
  bool have_best = false;
  for (std::uint64_t seed : config.seeds) {
    SingleRun run = run_em(data.x, data.y, config, seed);
    const double final_ll = run.trace.empty() ? -INFINITY : run.trace.back();
    best.seed_logliks.push_back(final_ll);
    if (!have_best || final_ll > best.final_loglik()) {
      have_best = true;
      best.params = std::move(run.params);
      best.loglik_trace = std::move(run.trace);
      best.converged = run.converged;
      best.n_iters = run.n_iters;
      best.seed = seed;
      best.diagnostics = std::move(run.diagnostics);
    }
  }
  best.e_step = e_step(data.x, data.y, best.params);
  best.centering = std::move(centering);
  return best;
}

}  // namespace supcp
