#include "supcp/cp_als.hpp"

#include "supcp/errors.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace supcp {

namespace {

double residual_ss(const MultiwayArray& x, const std::vector<Matrix>& factors) {
  LoadingSet rest(std::vector<Matrix>(factors.begin() + 1, factors.end()));
  const Matrix fitted = factors.front() * vmat(rest).transpose();
  return (x.sample_matrix() - fitted).squaredNorm();
}

// Move column norms of the non-sample factors into the sample factor.
void absorb_scales(std::vector<Matrix>& factors) {
  for (std::size_t k = 1; k < factors.size(); ++k) {
    for (Eigen::Index r = 0; r < factors[k].cols(); ++r) {
      const double norm = factors[k].col(r).norm();
      if (norm == 0.0) continue;
      factors[k].col(r) /= norm;
      factors[0].col(r) *= norm;
    }
  }
}

}  // namespace

CpFit cp_fit_als(const MultiwayArray& x, const CpConfig& config) {
  const std::size_t modes = x.order();
  if (modes < 2) throw InvalidArgument("cp_fit_als needs an array of order >= 2");
  if (config.rank < 1) throw InvalidArgument("cp_fit_als: rank must be >= 1");
  if (config.max_iters < 1) throw InvalidArgument("cp_fit_als: max_iters must be >= 1");

  std::size_t max_rank = 0;
  for (std::size_t k = 0; k < modes; ++k) {
    std::size_t p = 1;
    for (std::size_t j = 0; j < modes; ++j)
      if (j != k) p *= x.dim(j);
    max_rank = std::max(max_rank, p);
  }
  if (static_cast<std::size_t>(config.rank) > max_rank)
    throw InvalidArgument("cp_fit_als: rank exceeds the largest product of all but one dimension");

  const Eigen::Index rank = config.rank;
  CpFit fit;

  const double x_ss = x.frobenius_norm() * x.frobenius_norm();
  if (x_ss == 0.0) {
    fit.u = Matrix::Zero(static_cast<Eigen::Index>(x.dim(0)), rank);
    std::vector<Matrix> loadings;
    for (std::size_t k = 1; k < modes; ++k) {
      Matrix v = Matrix::Zero(static_cast<Eigen::Index>(x.dim(k)), rank);
      v.row(0).setOnes();
      loadings.push_back(std::move(v));
    }
    fit.loadings = LoadingSet(std::move(loadings));
    fit.converged = true;
    return fit;
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  std::vector<Matrix> factors;
  for (std::size_t k = 0; k < modes; ++k) {
    Matrix a(static_cast<Eigen::Index>(x.dim(k)), rank);
    for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = normal(rng);
    factors.push_back(std::move(a));
  }
  absorb_scales(factors);

  std::vector<Matrix> grams(modes);
  for (std::size_t k = 0; k < modes; ++k)
    grams[k] = factors[k].transpose() * factors[k];

  double prev_rss = residual_ss(x, factors);
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    for (std::size_t k = 0; k < modes; ++k) {
      Matrix h = Matrix::Ones(rank, rank);
      for (std::size_t j = 0; j < modes; ++j)
        if (j != k) h = h.cwiseProduct(grams[j]);
      const Matrix rhs = mttkrp(x, factors, k);
      bool jittered = false;
      factors[k] = solve_spd_right(rhs, h, jittered);
      if (jittered)
        fit.diagnostics.push_back("iteration " + std::to_string(iter) + ", mode " +
                                  std::to_string(k) + ": ridge-stabilized normal equations");
      grams[k] = factors[k].transpose() * factors[k];
    }
    absorb_scales(factors);
    for (std::size_t k = 0; k < modes; ++k)
      grams[k] = factors[k].transpose() * factors[k];

    const double rss = residual_ss(x, factors);
    fit.rss_trace.push_back(rss);
    fit.n_iters = iter;
    const double decrease = prev_rss - rss;
    prev_rss = rss;
    if (rss <= 1e-30 * x_ss || decrease < config.tol * std::max(rss + decrease, 1e-300)) {
      fit.converged = true;
      break;
    }
  }

  // Sign convention on loadings, compensated in u; order by u column norm.
  for (std::size_t k = 1; k < modes; ++k)
    for (Eigen::Index r = 0; r < rank; ++r)
      factors[0].col(r) *= sign_normalize(factors[k].col(r));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(rank));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return factors[0].col(a).norm() > factors[0].col(b).norm();
  });
  for (auto& f : factors) f = permute_columns(f, order);

  fit.u = std::move(factors[0]);
  fit.loadings = LoadingSet(std::vector<Matrix>(std::make_move_iterator(factors.begin() + 1),
                                                std::make_move_iterator(factors.end())));
  fit.rss = residual_ss(x, [&] {
    std::vector<Matrix> all{fit.u};
    for (const auto& v : fit.loadings.factors) all.push_back(v);
    return all;
  }());
  return fit;
}

}  // namespace supcp
