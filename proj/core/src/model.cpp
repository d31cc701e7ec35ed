#include "supcp/model.hpp"

#include "linalg.hpp"
#include "supcp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace supcp {

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kVarianceFloor = 1e-12;

void check_data_shapes(const MultiwayArray& x, const Matrix& y, const SupCpParams& params) {
  if (x.order() < 2) throw InvalidArgument("data array must have a sample mode plus >= 1 mode");
  if (static_cast<std::size_t>(y.rows()) != x.dim(0))
    throw InvalidArgument("covariate rows must equal the number of samples");
  if (y.cols() != params.b.rows())
    throw InvalidArgument("covariate columns must equal the rows of B");
  const Dims loading_dims = params.loadings.dims();
  if (loading_dims.size() + 1 != x.order() ||
      !std::equal(loading_dims.begin(), loading_dims.end(), x.dims().begin() + 1))
    throw InvalidArgument("loading dimensions do not match the data array");
}

// Hadamard product of the Gram matrices of all loadings, i.e. vmat^T vmat.
Matrix loading_gram(const LoadingSet& loadings, std::ptrdiff_t skip = -1) {
  const Eigen::Index rank = loadings.rank();
  Matrix g = Matrix::Ones(rank, rank);
  for (std::size_t k = 0; k < loadings.order(); ++k) {
    if (static_cast<std::ptrdiff_t>(k) == skip) continue;
    g = g.cwiseProduct(loadings.factors[k].transpose() * loadings.factors[k]);
  }
  return g;
}

}  // namespace

std::pair<Dataset, Centering> center(const Dataset& data) {
  Centering c;
  c.x_mean = data.x.sample_matrix().colwise().mean().transpose();
  c.y_mean = data.y.rows() > 0 ? Vector(data.y.colwise().mean().transpose())
                               : Vector::Zero(data.y.cols());
  return {apply_centering(data, c), std::move(c)};
}

Dataset apply_centering(const Dataset& data, const Centering& centering) {
  if (static_cast<std::size_t>(centering.x_mean.size()) != data.x.sample_size() ||
      centering.y_mean.size() != data.y.cols())
    throw InvalidArgument("centering vectors do not match the data shape");
  Dataset out{data.x, data.y};
  out.x.sample_matrix().rowwise() -= centering.x_mean.transpose();
  out.y.rowwise() -= centering.y_mean.transpose();
  return out;
}

void SupCpParams::validate() const {
  const Eigen::Index r = rank();
  if (loadings.order() < 1 || r < 1) throw InvalidParameter("parameters need >= 1 mode and rank >= 1");
  if (b.cols() != r) throw InvalidParameter("B must have R columns");
  if (sigma_f.rows() != r || sigma_f.cols() != r) throw InvalidParameter("Sigma_f must be R x R");
  if (!(sigma_e2 > 0.0) || !std::isfinite(sigma_e2))
    throw InvalidParameter("sigma_e^2 must be positive and finite");
  if (!sigma_f.allFinite() || !b.allFinite()) throw InvalidParameter("non-finite parameters");
  for (const auto& v : loadings.factors)
    if (!v.allFinite()) throw InvalidParameter("non-finite loadings");
  const PsdRoot root = psd_sqrt(sigma_f);
  if (root.min_eigenvalue < -kPsdTolerance * std::max(1.0, root.max_eigenvalue))
    throw InvalidParameter("Sigma_f is not positive semidefinite");
}

double marginal_loglik(const MultiwayArray& x, const Matrix& y, const SupCpParams& params) {
  params.validate();
  check_data_shapes(x, y, params);

  const auto n = static_cast<double>(x.dim(0));
  const auto d = static_cast<double>(x.sample_size());
  const double s2 = params.sigma_e2;
  const Eigen::Index r = params.rank();

  const auto x1 = x.sample_matrix();
  const Matrix v = vmat(params.loadings);
  const Matrix g = loading_gram(params.loadings);
  const Matrix yb = y * params.b;
  const Matrix xv = x1 * v;

  // Residual rows x_i - V B^T y_i, projected (z) and squared norm (rss).
  const Matrix z = xv - yb * g;
  const double rss = x1.squaredNorm() - 2.0 * xv.cwiseProduct(yb).sum() +
                     (yb * g).cwiseProduct(yb).sum();

  const Matrix root = psd_sqrt(params.sigma_f).root;
  Matrix m = Matrix::Identity(r, r) + root * g * root / s2;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("marginal_loglik: I + S^1/2 G S^1/2 not SPD");
  const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double logdet = d * std::log(s2) + logdet_m;

  const Matrix zr = z * root;
  const double correction = llt.solve(zr.transpose()).cwiseProduct(zr.transpose()).sum();
  const double quad = rss / s2 - correction / (s2 * s2);

  return -0.5 * n * d * std::log(2.0 * std::numbers::pi) - 0.5 * n * logdet - 0.5 * quad;
}

EStepResult e_step(const MultiwayArray& x, const Matrix& y, const SupCpParams& params) {
  params.validate();
  check_data_shapes(x, y, params);

  const double s2 = params.sigma_e2;
  const Eigen::Index r = params.rank();
  const Matrix v = vmat(params.loadings);
  const Matrix g = loading_gram(params.loadings);
  const Matrix yb = y * params.b;

  const PsdRoot root = psd_sqrt(params.sigma_f);
  const Matrix m = Matrix::Identity(r, r) + root.root * g * root.root / s2;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("e_step: I + S^1/2 G S^1/2 not SPD");

  EStepResult out;
  // (G / s2 + Sigma_f^{-1})^{-1} written as S^1/2 M^{-1} S^1/2.
  out.sigma_u = root.root * llt.solve(root.root);
  out.sigma_u = 0.5 * (out.sigma_u + out.sigma_u.transpose()).eval();
  const Matrix z = x.sample_matrix() * v - yb * g;
  out.u_hat = yb + z * out.sigma_u / s2;
  out.degenerate_sigma_f = root.max_eigenvalue <= 0.0 ||
                           root.min_eigenvalue < 1e-12 * root.max_eigenvalue;
  return out;
}

LoadingSet m_step_loadings(const MultiwayArray& x, const EStepResult& posterior,
                           const SupCpParams& params, std::vector<std::string>* diagnostics) {
  const auto n = static_cast<double>(x.dim(0));
  const Eigen::Index r = params.rank();
  if (posterior.u_hat.cols() != r || posterior.u_hat.rows() != static_cast<Eigen::Index>(x.dim(0)))
    throw InvalidArgument("m_step_loadings: posterior shape mismatch");

  const Matrix score_moment =
      posterior.u_hat.transpose() * posterior.u_hat + n * posterior.sigma_u;

  std::vector<Matrix> factors;
  factors.reserve(params.loadings.order() + 1);
  factors.push_back(posterior.u_hat);
  for (const auto& f : params.loadings.factors) factors.push_back(f);

  LoadingSet current = params.loadings;
  for (std::size_t k = 0; k < current.order(); ++k) {
    const Matrix h = loading_gram(current, static_cast<std::ptrdiff_t>(k)).cwiseProduct(score_moment);
    const Matrix rhs = mttkrp(x, factors, k + 1);
    bool jittered = false;
    current.factors[k] = solve_spd_right(rhs, h, jittered);
    factors[k + 1] = current.factors[k];
    if (jittered && diagnostics)
      diagnostics->push_back("m_step_loadings: ridge-stabilized system for mode " + std::to_string(k));
  }
  return current;
}

double expected_residual_ss(const MultiwayArray& x, const EStepResult& posterior,
                            const LoadingSet& loadings) {
  const auto n = static_cast<double>(x.dim(0));
  const auto x1 = x.sample_matrix();
  const Matrix v = vmat(loadings);
  const Matrix g = loading_gram(loadings);
  const Matrix xv = x1 * v;
  return x1.squaredNorm() - 2.0 * xv.cwiseProduct(posterior.u_hat).sum() +
         n * g.cwiseProduct(posterior.sigma_u).sum() +
         (posterior.u_hat * g).cwiseProduct(posterior.u_hat).sum();
}

RegressionUpdate m_step_regression(const MultiwayArray& x, const Matrix& y,
                                   const EStepResult& posterior, const LoadingSet& loadings,
                                   bool diag_sigma_f) {
  const auto n = static_cast<double>(x.dim(0));
  const auto d = static_cast<double>(x.sample_size());
  const Matrix& u_hat = posterior.u_hat;
  if (y.rows() != u_hat.rows()) throw InvalidArgument("m_step_regression: row mismatch");

  RegressionUpdate out;
  if (y.cols() == 0 || y.isZero(0.0)) {
    out.b = Matrix::Zero(y.cols(), u_hat.cols());
  } else {
    Eigen::ColPivHouseholderQR<Matrix> qr(y);
    if (qr.rank() < y.cols())
      throw InvalidArgument(
          "covariate matrix is not of full column rank; remove collinear covariates");
    out.b = qr.solve(u_hat);
  }

  const Matrix resid = u_hat - y * out.b;
  out.sigma_f = resid.transpose() * resid / n + posterior.sigma_u;
  out.sigma_f = 0.5 * (out.sigma_f + out.sigma_f.transpose()).eval();
  if (diag_sigma_f) out.sigma_f = Matrix(out.sigma_f.diagonal().asDiagonal());

  out.sigma_e2 = expected_residual_ss(x, posterior, loadings) / (n * d);
  if (!(out.sigma_e2 > kVarianceFloor)) {
    std::ostringstream msg;
    msg << "m_step_regression: sigma_e^2 update " << out.sigma_e2 << " floored at " << kVarianceFloor;
    out.diagnostics.push_back(msg.str());
    out.sigma_e2 = kVarianceFloor;
  }
  return out;
}

SupCpParams normalize(SupCpParams params) {
  const Eigen::Index r = params.rank();
  Vector scale = Vector::Ones(r);
  Vector sign = Vector::Ones(r);
  for (auto& v : params.loadings.factors) {
    for (Eigen::Index c = 0; c < r; ++c) {
      const double norm = v.col(c).norm();
      if (!(norm > 0.0) || !std::isfinite(norm))
        throw DegenerateComponent("loading column " + std::to_string(c) +
                                  " is zero; consider a lower rank");
      v.col(c) /= norm;
      scale(c) *= norm;
      sign(c) *= sign_normalize(v.col(c));
    }
  }
  const Vector factor = scale.cwiseProduct(sign);
  params.b = params.b * factor.asDiagonal();
  params.sigma_f = factor.asDiagonal() * params.sigma_f * factor.asDiagonal();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  const Vector diag = params.sigma_f.diagonal();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return diag(a) > diag(b); });
  if (!std::is_sorted(order.begin(), order.end())) {
    for (auto& v : params.loadings.factors) v = permute_columns(v, order);
    params.b = permute_columns(params.b, order);
    params.sigma_f = permute_symmetric(params.sigma_f, order);
  }
  return params;
}

IdentifiabilityReport identifiability_check(const SupCpParams& params, const Matrix& y) {
  const Eigen::Index r = params.rank();
  if (r > 20) throw InvalidArgument("identifiability_check supports R <= 20");
  if (y.cols() != params.b.rows()) throw InvalidArgument("identifiability_check: y and B disagree");
  IdentifiabilityReport out;
  out.kr_yb = k_rank(y * params.b);
  int total = out.kr_yb;
  for (const auto& v : params.loadings.factors) {
    out.kr_loadings.push_back(k_rank(v));
    total += out.kr_loadings.back();
  }
  out.margin = total - static_cast<int>(2 * r + static_cast<Eigen::Index>(params.loadings.order()));
  out.y_full_column_rank = y.cols() > 0 && numerical_rank(y) == y.cols();
  out.satisfied = out.margin >= 0 && out.y_full_column_rank;
  return out;
}

MultiwayArray conditional_mean(const Vector& y_new, const SupCpParams& params) {
  if (y_new.size() != params.b.rows())
    throw InvalidArgument("conditional_mean: covariate vector length must equal q");
  const Matrix scores = y_new.transpose() * params.b;
  return cp_compose(scores, params.loadings);
}

}  // namespace supcp
