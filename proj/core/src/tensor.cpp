#include "supcp/tensor.hpp"

#include "supcp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

namespace supcp {

namespace {

std::size_t checked_product(const Dims& dims) {
  std::size_t total = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw InvalidArgument("array dimensions must be >= 1");
    if (total > std::numeric_limits<std::size_t>::max() / d)
      throw InvalidArgument("array size overflows");
    total *= d;
  }
  return total;
}

std::size_t product(const Dims& dims, std::size_t first, std::size_t last) {
  std::size_t p = 1;
  for (std::size_t i = first; i < last; ++i) p *= dims[i];
  return p;
}

}  // namespace

MultiwayArray::MultiwayArray(Dims dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw InvalidArgument("array order must be >= 1");
  values_.assign(checked_product(dims_), 0.0);
}

MultiwayArray::MultiwayArray(Dims dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  if (dims_.empty()) throw InvalidArgument("array order must be >= 1");
  const std::size_t expected = checked_product(dims_);
  if (values_.size() != expected)
    throw InvalidArgument("value buffer has " + std::to_string(values_.size()) +
                          " entries, dims require " + std::to_string(expected));
  if (!std::all_of(values_.begin(), values_.end(),
                   [](double v) { return std::isfinite(v); }))
    throw InvalidArgument("array contains non-finite values");
}

std::size_t MultiwayArray::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size())
    throw InvalidArgument("index arity does not match array order");
  std::size_t off = 0;
  for (std::size_t k = dims_.size(); k-- > 0;) {
    if (index[k] >= dims_[k]) throw InvalidArgument("index out of range");
    off = off * dims_[k] + index[k];
  }
  return off;
}

double MultiwayArray::operator()(std::initializer_list<std::size_t> index) const {
  return values_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& MultiwayArray::operator()(std::initializer_list<std::size_t> index) {
  return values_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

std::size_t MultiwayArray::sample_size() const noexcept {
  return dims_.empty() ? 0 : product(dims_, 1, dims_.size());
}

Eigen::Map<const Matrix> MultiwayArray::sample_matrix() const {
  return {values_.data(), static_cast<Eigen::Index>(dims_.at(0)),
          static_cast<Eigen::Index>(sample_size())};
}

Eigen::Map<Matrix> MultiwayArray::sample_matrix() {
  return {values_.data(), static_cast<Eigen::Index>(dims_.at(0)),
          static_cast<Eigen::Index>(sample_size())};
}

double MultiwayArray::frobenius_norm() const {
  return Eigen::Map<const Vector>(values_.data(),
                                  static_cast<Eigen::Index>(values_.size()))
      .norm();
}

LoadingSet::LoadingSet(std::vector<Matrix> f) : factors(std::move(f)) {
  for (const auto& m : factors) {
    if (m.cols() != factors.front().cols())
      throw InvalidArgument("loading matrices must share the same rank");
    if (m.rows() < 1) throw InvalidArgument("loading matrices need >= 1 row");
  }
}

Dims LoadingSet::dims() const {
  Dims out;
  out.reserve(factors.size());
  for (const auto& m : factors) out.push_back(static_cast<std::size_t>(m.rows()));
  return out;
}

std::size_t LoadingSet::total_size() const {
  std::size_t d = 1;
  for (const auto& m : factors) d *= static_cast<std::size_t>(m.rows());
  return d;
}

bool LoadingSet::is_normalized(double tol) const {
  for (const auto& m : factors) {
    for (Eigen::Index r = 0; r < m.cols(); ++r) {
      if (std::abs(m.col(r).norm() - 1.0) > tol) return false;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (m(i, r) != 0.0) {
          if (m(i, r) < 0.0) return false;
          break;
        }
      }
    }
  }
  return true;
}

MultiwayArray outer_product(std::span<const Vector> vectors) {
  if (vectors.empty()) throw InvalidArgument("outer_product needs >= 1 vector");
  std::vector<Matrix> cols;
  Dims dims;
  for (const auto& v : vectors) {
    if (v.size() == 0) throw InvalidArgument("outer_product of an empty vector");
    cols.emplace_back(v);
    dims.push_back(static_cast<std::size_t>(v.size()));
  }
  Matrix kr = khatri_rao(cols);
  return MultiwayArray(std::move(dims),
                       std::vector<double>(kr.data(), kr.data() + kr.size()));
}

Matrix unfold(const MultiwayArray& x, std::size_t mode) {
  if (mode >= x.order()) throw InvalidArgument("unfold: mode out of range");
  const auto& dims = x.dims();
  const std::size_t left = product(dims, 0, mode);
  const std::size_t mid = dims[mode];
  const std::size_t right = product(dims, mode + 1, dims.size());
  Matrix out(static_cast<Eigen::Index>(mid), static_cast<Eigen::Index>(left * right));
  const double* src = x.data();
  for (std::size_t rr = 0; rr < right; ++rr)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * rr)) =
            src[l + left * (i + mid * rr)];
  return out;
}

MultiwayArray fold(const Matrix& m, const Dims& dims, std::size_t mode) {
  if (mode >= dims.size()) throw InvalidArgument("fold: mode out of range");
  MultiwayArray out(dims);
  const std::size_t left = product(dims, 0, mode);
  const std::size_t mid = dims[mode];
  const std::size_t right = product(dims, mode + 1, dims.size());
  if (static_cast<std::size_t>(m.rows()) != mid ||
      static_cast<std::size_t>(m.cols()) != left * right)
    throw InvalidArgument("fold: matrix shape does not match dims and mode");
  double* dst = out.data();
  for (std::size_t rr = 0; rr < right; ++rr)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l)
        dst[l + left * (i + mid * rr)] =
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * rr));
  return out;
}

Matrix khatri_rao(std::span<const Matrix> factors) {
  if (factors.empty()) throw InvalidArgument("khatri_rao needs >= 1 factor");
  const Eigen::Index rank = factors.front().cols();
  Matrix acc = factors.front();
  for (std::size_t f = 1; f < factors.size(); ++f) {
    const Matrix& next = factors[f];
    if (next.cols() != rank) throw InvalidArgument("khatri_rao: rank mismatch");
    Matrix grown(acc.rows() * next.rows(), rank);
    for (Eigen::Index r = 0; r < rank; ++r)
      for (Eigen::Index j = 0; j < next.rows(); ++j)
        grown.col(r).segment(j * acc.rows(), acc.rows()) = acc.col(r) * next(j, r);
    acc = std::move(grown);
  }
  return acc;
}

Matrix vmat(const LoadingSet& loadings) {
  if (loadings.factors.empty()) throw InvalidArgument("vmat of an empty loading set");
  return khatri_rao(loadings.factors);
}

MultiwayArray cp_compose(const Matrix& u, const LoadingSet& loadings) {
  if (u.cols() != loadings.rank())
    throw InvalidArgument("cp_compose: score and loading ranks differ");
  Dims dims{static_cast<std::size_t>(u.rows())};
  for (std::size_t d : loadings.dims()) dims.push_back(d);
  MultiwayArray out(std::move(dims));
  out.sample_matrix().noalias() = u * vmat(loadings).transpose();
  return out;
}

Matrix mttkrp(const MultiwayArray& x, std::span<const Matrix> factors,
              std::size_t mode) {
  const auto& dims = x.dims();
  if (mode >= dims.size()) throw InvalidArgument("mttkrp: mode out of range");
  if (factors.size() != dims.size())
    throw InvalidArgument("mttkrp: need one factor per mode");
  Eigen::Index rank = -1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k == mode) continue;
    if (static_cast<std::size_t>(factors[k].rows()) != dims[k])
      throw InvalidArgument("mttkrp: factor rows do not match array dims");
    if (rank < 0) rank = factors[k].cols();
    if (factors[k].cols() != rank) throw InvalidArgument("mttkrp: rank mismatch");
  }
  const auto left = static_cast<Eigen::Index>(product(dims, 0, mode));
  const auto mid = static_cast<Eigen::Index>(dims[mode]);
  const auto right = static_cast<Eigen::Index>(product(dims, mode + 1, dims.size()));

  if (dims.size() == 1) return Eigen::Map<const Matrix>(x.data(), mid, 1);

  const bool has_left = mode > 0;
  const bool has_right = mode + 1 < dims.size();
  Matrix kr_left, kr_right;
  if (has_left) kr_left = khatri_rao(factors.subspan(0, mode));
  if (has_right) kr_right = khatri_rao(factors.subspan(mode + 1));

  if (!has_left) {
    // x viewed as mid x right
    return Eigen::Map<const Matrix>(x.data(), mid, right) * kr_right;
  }
  if (!has_right) {
    return Eigen::Map<const Matrix>(x.data(), left, mid).transpose() * kr_left;
  }
  // Contract the left modes with one GEMM, then the right modes per column.
  const Matrix partial =
      Eigen::Map<const Matrix>(x.data(), left, mid * right).transpose() * kr_left;
  Matrix out = Matrix::Zero(mid, rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    const Eigen::Map<const Matrix> slab(partial.col(r).data(), mid, right);
    out.col(r).noalias() = slab * kr_right.col(r);
  }
  return out;
}

double frobenius_distance(const MultiwayArray& a, const MultiwayArray& b) {
  if (a.dims() != b.dims())
    throw InvalidArgument("frobenius_distance: dims mismatch");
  double sum = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = pa[i] - pb[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

int numerical_rank(const Matrix& m, double rtol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rtol * s(0)) ++rank;
  return rank;
}

int k_rank(const Matrix& m) {
  constexpr double kRankTol = 1e-10;
  const auto cols = static_cast<int>(m.cols());
  if (cols > 20) throw InvalidArgument("k_rank supports at most 20 columns");
  if (cols == 0 || m.rows() == 0) return 0;
  for (int c = 0; c < cols; ++c)
    if (m.col(c).isZero(0.0)) return 0;

  Eigen::JacobiSVD<Matrix> full(m);
  const double threshold = kRankTol * full.singularValues()(0);
  auto independent = [&](const std::vector<int>& subset) {
    Matrix sub(m.rows(), static_cast<Eigen::Index>(subset.size()));
    for (std::size_t j = 0; j < subset.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = m.col(subset[j]);
    Eigen::JacobiSVD<Matrix> svd(sub);
    const auto& s = svd.singularValues();
    if (s.size() < static_cast<Eigen::Index>(subset.size())) return false;
    return s(s.size() - 1) > threshold;
  };

  // Every k-subset of independent columns implies every smaller subset is
  // too, so grow k until some subset fails.
  int best = 0;
  for (int k = 1; k <= std::min<int>(cols, static_cast<int>(m.rows())); ++k) {
    std::vector<bool> mask(static_cast<std::size_t>(cols), false);
    std::fill(mask.begin(), mask.begin() + k, true);
    bool all_ok = true;
    do {
      std::vector<int> subset;
      for (int c = 0; c < cols; ++c)
        if (mask[static_cast<std::size_t>(c)]) subset.push_back(c);
      if (!independent(subset)) {
        all_ok = false;
        break;
      }
    } while (std::prev_permutation(mask.begin(), mask.end()));
    if (!all_ok) break;
    best = k;
  }
  return best;
}

double sign_normalize(Eigen::Ref<Vector> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) != 0.0) {
      if (v(i) < 0.0) {
        v = -v;
        return -1.0;
      }
      return 1.0;
    }
  }
  return 1.0;
}

}  // namespace supcp

namespace supcp {

MultiwayArray flatten_sample_modes(const MultiwayArray& x) {
  if (x.order() < 2) throw InvalidArgument("flatten_sample_modes needs order >= 2");
  const auto v = x.values();
  return MultiwayArray(Dims{x.dim(0), x.sample_size()},
                       std::vector<double>(v.begin(), v.end()));
}

}  // namespace supcp
