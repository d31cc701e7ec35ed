#pragma once

#include "supcp/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace supcp {

struct CpConfig {
  int rank = 1;
  int max_iters = 500;
  /// Stop when the relative decrease of the residual sum of squares drops
  /// below this.
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

/// Least-squares CP fit of a samples-first array. Component scales are
/// absorbed into `u`; the loadings cover the non-sample modes only.
struct CpFit {
  Matrix u;
  LoadingSet loadings;
  double rss = 0.0;
  int n_iters = 0;
  bool converged = false;
  std::vector<double> rss_trace;
  std::vector<std::string> diagnostics;

  MultiwayArray signal() const { return cp_compose(u, loadings); }
};

/// Alternating least squares: sample mode first, then the remaining modes in
/// ascending order, one full sweep per iteration. Factors start from seeded
/// standard normals. On return loadings have unit-norm columns with a positive
/// leading entry and components are ordered by decreasing norm of u's columns.
CpFit cp_fit_als(const MultiwayArray& x, const CpConfig& config);

}  // namespace supcp
