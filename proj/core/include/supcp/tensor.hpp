#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace supcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Dims = std::vector<std::size_t>;

/// Dense K-way array of doubles.
///
/// Entries are stored mode-1-fastest (a column-major generalization): the
/// linear offset of entry (i_0, ..., i_{K-1}) is
/// i_0 + d_0 * (i_1 + d_1 * (i_2 + ...)). Modes are 0-based throughout the
/// library. Data arrays carry samples in mode 0, so the sample-mode unfolding
/// is a free reinterpretation of the buffer as an n x d column-major matrix.
class MultiwayArray {
 public:
  MultiwayArray() = default;

  /// Zero-filled array. Every dim must be >= 1.
  explicit MultiwayArray(Dims dims);

  /// Takes ownership of `values`; its length must equal the product of dims
  /// and every entry must be finite.
  MultiwayArray(Dims dims, std::vector<double> values);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  std::size_t offset(std::span<const std::size_t> index) const;
  double operator()(std::initializer_list<std::size_t> index) const;
  double& operator()(std::initializer_list<std::size_t> index);

  /// Product of all dims except mode 0 (the per-sample dimension d).
  std::size_t sample_size() const noexcept;

  /// Mode-0 unfolding as an n x d view onto the buffer.
  Eigen::Map<const Matrix> sample_matrix() const;
  Eigen::Map<Matrix> sample_matrix();

  double frobenius_norm() const;

  friend bool operator==(const MultiwayArray&, const MultiwayArray&) = default;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Loading matrices V_1..V_K, each d_k x R.
struct LoadingSet {
  std::vector<Matrix> factors;

  LoadingSet() = default;
  explicit LoadingSet(std::vector<Matrix> f);

  std::size_t order() const noexcept { return factors.size(); }
  Eigen::Index rank() const noexcept {
    return factors.empty() ? 0 : factors.front().cols();
  }
  Dims dims() const;
  std::size_t total_size() const;

  /// Unit-norm columns with a positive first nonzero entry, to `tol`.
  bool is_normalized(double tol = 1e-10) const;
};

/// Rank-one array with entry [i_0..i_{K-1}] = prod_k vectors[k][i_k].
MultiwayArray outer_product(std::span<const Vector> vectors);

/// Mode-k unfolding: d_k rows, columns enumerate the remaining modes with the
/// lowest remaining mode varying fastest.
Matrix unfold(const MultiwayArray& x, std::size_t mode);

/// Inverse of unfold.
MultiwayArray fold(const Matrix& m, const Dims& dims, std::size_t mode);

/// Columnwise Khatri-Rao product with the first matrix's row index varying
/// fastest: column r is kron(A_last[:, r], ..., A_first[:, r]).
Matrix khatri_rao(std::span<const Matrix> factors);

/// d x R matrix whose column r is the vectorized v_1r o ... o v_Kr.
Matrix vmat(const LoadingSet& loadings);

/// [[U, V_1, ..., V_K]] as an n x d_1 x ... x d_K array.
MultiwayArray cp_compose(const Matrix& u, const LoadingSet& loadings);

/// Matricized-tensor times Khatri-Rao product for `mode`: returns
/// unfold(x, mode) * khatri_rao(factors without `mode`). `factors` holds one
/// matrix per mode of x; the entry at `mode` is ignored.
Matrix mttkrp(const MultiwayArray& x, std::span<const Matrix> factors,
              std::size_t mode);

double frobenius_distance(const MultiwayArray& a, const MultiwayArray& b);

/// Largest k such that every k columns are linearly independent. Numerical
/// rank uses singular values above 1e-10 * sigma_max(m). At most 20 columns.
int k_rank(const Matrix& m);

/// Numerical rank at relative tolerance `rtol`.
int numerical_rank(const Matrix& m, double rtol = 1e-10);

/// Flip v so its first nonzero entry is positive; returns the applied sign.
double sign_normalize(Eigen::Ref<Vector> v);

}  // namespace supcp

namespace supcp {

/// Collapse every non-sample mode of a samples-first array into one, giving
/// an n x d two-way array over the same buffer.
MultiwayArray flatten_sample_modes(const MultiwayArray& x);

}  // namespace supcp
