#include "supcp/simulation.hpp"

#include "supcp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace supcp {

namespace {

constexpr Eigen::Index kSamples = 100;
constexpr Eigen::Index kCovariates = 10;
constexpr Eigen::Index kRank = 5;

class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}

  Matrix normal(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal_(rng_);
    return m;
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }

  /// Orthonormal columns from the QR factorization of a Gaussian matrix.
  Matrix orthonormal(Eigen::Index rows, Eigen::Index cols) {
    Eigen::HouseholderQR<Matrix> qr(normal(rows, cols));
    return qr.householderQ() * Matrix::Identity(rows, cols);
  }

  /// Orthonormal columns from the left singular vectors of a Gaussian matrix.
  Matrix orthonormal_svd(Eigen::Index rows, Eigen::Index cols) {
    Eigen::JacobiSVD<Matrix> svd(normal(rows, cols), Eigen::ComputeThinU);
    return svd.matrixU();
  }

  /// Unit-norm columns with pairwise inner products 0.95^2: a shared unit
  /// direction mixed with mutually orthogonal perturbations.
  Matrix collinear(Eigen::Index rows, Eigen::Index cols, double weight) {
    Eigen::HouseholderQR<Matrix> qr(normal(rows, cols + 1));
    const Matrix basis = qr.householderQ() * Matrix::Identity(rows, cols + 1);
    const double rest = std::sqrt(1.0 - weight * weight);
    Matrix v(rows, cols);
    for (Eigen::Index r = 0; r < cols; ++r) v.col(r) = weight * basis.col(0) + rest * basis.col(r + 1);
    return v;
  }

  MultiwayArray noise(const Dims& dims, double variance) {
    MultiwayArray e(dims);
    const double sd = std::sqrt(variance);
    for (auto& value : e.values()) value = sd * normal_(rng_);
    return e;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

void center_columns(Matrix& m) {
  if (m.rows() > 0) m.rowwise() -= m.colwise().mean();
}

// F rows ~ N(0, diag(variances)), column-centered.
Matrix factor_residuals(Draws& draws, Eigen::Index n, const Vector& variances) {
  Matrix f = draws.normal(n, variances.size()) * variances.cwiseSqrt().asDiagonal();
  center_columns(f);
  return f;
}

SimData assemble(Draws& draws, Matrix y, Matrix b, Matrix f, LoadingSet loadings,
                 Matrix sigma_f, double sigma_e2) {
  SimData out;
  SimTruth& t = out.truth;
  t.u = y * b + f;
  t.loadings = std::move(loadings);
  t.b = std::move(b);
  t.sigma_f = std::move(sigma_f);
  t.sigma_e2 = sigma_e2;
  t.signal = cp_compose(t.u, t.loadings);
  t.y = y;

  MultiwayArray x = draws.noise(t.signal.dims(), sigma_e2);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += t.signal.data()[i];
  out.data = Dataset{std::move(x), std::move(y)};
  return out;
}

}  // namespace

SupCpParams SimTruth::params() const {
  SupCpParams p;
  p.loadings = loadings;
  p.b = b;
  p.sigma_f = sigma_f;
  p.sigma_e2 = sigma_e2;
  p.diag_constraint = sigma_f.isDiagonal(0.0);
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SimData generate_setting(int setting, std::uint64_t seed) {
  if (setting < 1 || setting > 4) throw InvalidArgument("setting must be 1, 2, 3 or 4");
  Draws draws(seed);

  const Eigen::Index d = setting == 4 ? 50 : 10;
  Matrix y = draws.normal(kSamples, kCovariates);
  center_columns(y);

  LoadingSet loadings;
  if (setting == 2) {
    loadings = LoadingSet({draws.collinear(d, kRank, 0.95), draws.collinear(d, kRank, 0.95)});
  } else {
    loadings = LoadingSet({draws.orthonormal(d, kRank), draws.orthonormal(d, kRank)});
  }

  Vector variances(kRank);
  switch (setting) {
    case 1: variances << 100, 64, 36, 16, 4; break;
    case 3: variances.setZero(); break;
    default: variances << 25, 16, 9, 4, 1; break;
  }
  const double sigma_e2 = setting == 1 ? 1.0 : setting == 2 ? 1.0 : setting == 3 ? 6.0 : 0.5;

  Matrix b = Matrix::Zero(kCovariates, kRank);
  if (setting != 1) {
    // Scale so that ||Y B||_F matches the expected ||F||_F under the
    // Setting-2 covariance {25, 16, 9, 4, 1}.
    b = draws.normal(kCovariates, kRank);
    const double target = std::sqrt(static_cast<double>(kSamples) * 55.0);
    b *= target / (y * b).norm();
  }

  Matrix f = setting == 3 ? Matrix::Zero(kSamples, kRank) : factor_residuals(draws, kSamples, variances);
  return assemble(draws, std::move(y), std::move(b), std::move(f), std::move(loadings),
                  Matrix(variances.asDiagonal()), sigma_e2);
}

SimData generate_rank_sim(int true_rank, std::uint64_t seed) {
  if (true_rank < 1 || true_rank > 10) throw InvalidArgument("rank simulation needs 1 <= R <= 10");
  const Eigen::Index r = true_rank;
  Draws draws(seed);

  Matrix y = draws.normal(kSamples, kCovariates);
  center_columns(y);
  Matrix b = draws.normal(kCovariates, r);

  Vector variances(r);
  for (Eigen::Index i = 0; i < r; ++i) variances(i) = draws.uniform(5.0, 25.0);
  std::sort(variances.data(), variances.data() + r, std::greater<>());
  Matrix f = factor_residuals(draws, kSamples, variances);

  LoadingSet loadings({draws.orthonormal_svd(25, r), draws.orthonormal_svd(25, r)});
  return assemble(draws, std::move(y), std::move(b), std::move(f), std::move(loadings),
                  Matrix(variances.asDiagonal()), 1.0);
}

SimData generate_init_sim(std::uint64_t seed) {
  constexpr Eigen::Index n = 10;
  constexpr Eigen::Index r = 2;
  Draws draws(seed);

  Vector variances(r);
  for (Eigen::Index i = 0; i < r; ++i) variances(i) = draws.uniform(2.0, 22.0);
  Matrix u = draws.normal(n, r) * variances.cwiseSqrt().asDiagonal();
  center_columns(u);

  Matrix f = draws.normal(n, 1);
  center_columns(f);
  Matrix y = u.col(0) - f;

  std::vector<Matrix> factors;
  for (Eigen::Index dk : {20, 40, 50}) {
    Matrix v = draws.normal(dk, r);
    v.colwise().normalize();
    factors.push_back(std::move(v));
  }

  SimData out;
  SimTruth& t = out.truth;
  t.u = std::move(u);
  t.loadings = LoadingSet(std::move(factors));
  t.b = Matrix::Zero(1, r);
  t.sigma_f = variances.asDiagonal();
  t.sigma_e2 = 1.0;
  t.signal = cp_compose(t.u, t.loadings);
  t.y = y;

  MultiwayArray x = draws.noise(t.signal.dims(), 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += t.signal.data()[i];
  out.data = Dataset{std::move(x), std::move(y)};
  return out;
}

}  // namespace supcp
