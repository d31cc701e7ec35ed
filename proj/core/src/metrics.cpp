#include "supcp/errors.hpp"
#include "supcp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace supcp {

namespace {

Matrix column_space(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) throw InvalidArgument("principal_angle: zero matrix");
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

double signal_error(const MultiwayArray& fitted, const MultiwayArray& truth) {
  return frobenius_distance(fitted, truth);
}

double principal_angle(const Matrix& v, const Matrix& v_hat) {
  if (v.rows() != v_hat.rows()) throw InvalidArgument("principal_angle: row counts differ");
  const Matrix qa = column_space(v);
  const Matrix qb = column_space(v_hat);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const auto& s = svd.singularValues();
  const double smallest = std::clamp(s(s.size() - 1), 0.0, 1.0);
  double angle = std::acos(smallest);
  // acos is ill-conditioned near 1; small angles come from the sine instead.
  if (smallest * smallest > 0.5) {
    const bool a_wider = qa.cols() >= qb.cols();
    const Matrix& wide = a_wider ? qa : qb;
    const Matrix& narrow = a_wider ? qb : qa;
    const Matrix residual = narrow - wide * (wide.transpose() * narrow);
    Eigen::JacobiSVD<Matrix> rsvd(residual);
    angle = std::asin(std::clamp(rsvd.singularValues()(0), 0.0, 1.0));
  }
  return angle * 180.0 / std::numbers::pi;
}

ComponentMatch align_components(const Matrix& truth_vmat, const Matrix& estimated_vmat) {
  if (truth_vmat.rows() != estimated_vmat.rows() || truth_vmat.cols() != estimated_vmat.cols())
    throw InvalidArgument("align_components: shapes differ");
  const Eigen::Index r = truth_vmat.cols();
  Matrix cosine(r, r);
  for (Eigen::Index t = 0; t < r; ++t)
    for (Eigen::Index e = 0; e < r; ++e) {
      const double denom = truth_vmat.col(t).norm() * estimated_vmat.col(e).norm();
      cosine(t, e) = denom > 0.0 ? truth_vmat.col(t).dot(estimated_vmat.col(e)) / denom : 0.0;
    }

  ComponentMatch match;
  match.estimated_for_truth.assign(static_cast<std::size_t>(r), -1);
  match.sign.assign(static_cast<std::size_t>(r), 1.0);
  std::vector<bool> truth_used(static_cast<std::size_t>(r), false);
  std::vector<bool> est_used(static_cast<std::size_t>(r), false);
  for (Eigen::Index step = 0; step < r; ++step) {
    double best = -1.0;
    Eigen::Index bt = 0, be = 0;
    for (Eigen::Index t = 0; t < r; ++t) {
      if (truth_used[static_cast<std::size_t>(t)]) continue;
      for (Eigen::Index e = 0; e < r; ++e) {
        if (est_used[static_cast<std::size_t>(e)]) continue;
        if (std::abs(cosine(t, e)) > best) {
          best = std::abs(cosine(t, e));
          bt = t;
          be = e;
        }
      }
    }
    truth_used[static_cast<std::size_t>(bt)] = true;
    est_used[static_cast<std::size_t>(be)] = true;
    match.estimated_for_truth[static_cast<std::size_t>(bt)] = be;
    match.sign[static_cast<std::size_t>(bt)] = cosine(bt, be) < 0.0 ? -1.0 : 1.0;
  }
  return match;
}

RelativeErrors relative_errors(const Matrix& estimated_vmat, const Matrix& b_hat,
                               const Matrix& sigma_f_hat, double sigma_e2_hat,
                               const SimTruth& truth) {
  const Matrix truth_vmat = vmat(truth.loadings);
  const Eigen::Index r = truth_vmat.cols();
  if (b_hat.rows() != truth.b.rows() || b_hat.cols() != r || sigma_f_hat.rows() != r)
    throw InvalidArgument("relative_errors: parameter shapes differ from the truth");
  const ComponentMatch match = align_components(truth_vmat, estimated_vmat);

  // Express each estimated component in the truth's column scaling.
  Matrix b_aligned(b_hat.rows(), r);
  Vector sf_aligned(r);
  for (Eigen::Index t = 0; t < r; ++t) {
    const Eigen::Index e = match.estimated_for_truth[static_cast<std::size_t>(t)];
    const double ratio = estimated_vmat.col(e).norm() / truth_vmat.col(t).norm();
    b_aligned.col(t) = b_hat.col(e) * ratio * match.sign[static_cast<std::size_t>(t)];
    sf_aligned(t) = sigma_f_hat(e, e) * ratio * ratio;
  }

  RelativeErrors out;
  out.re_e = std::abs(truth.sigma_e2 - sigma_e2_hat) / truth.sigma_e2;
  out.b_error = (truth.b - b_aligned).norm();
  const Vector truth_diag = truth.sigma_f.diagonal();
  if ((truth_diag.array() > 0.0).all()) {
    out.re_f = ((truth_diag - sf_aligned).cwiseAbs().array() / truth_diag.array()).mean();
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty sample");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double median_absolute_deviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(std::move(dev));
}

}  // namespace supcp
