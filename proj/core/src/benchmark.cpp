#include "supcp/cp_als.hpp"
#include "supcp/errors.hpp"
#include "supcp/parallel.hpp"
#include "supcp/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

namespace supcp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

using MetricValues = std::vector<std::pair<std::string, double>>;

struct MethodOutcome {
  explicit MethodOutcome(Method m) : method(m) {}
  Method method;
  bool ok = false;
  std::string error;
  MetricValues metrics;
};

MethodOutcome run_supcp(const SimData& sim, const Dataset& centered, const FitConfig& cfg) {
  MethodOutcome out{Method::supcp};
  const auto start = Clock::now();
  const FitResult fitted = fit(centered.x, centered.y, cfg);
  const double elapsed = seconds_since(start);
  out.metrics.emplace_back("SE", signal_error(fitted.signal(), sim.truth.signal));
  for (std::size_t k = 0; k < sim.truth.loadings.order(); ++k)
    out.metrics.emplace_back("angle_V" + std::to_string(k + 1),
                             principal_angle(sim.truth.loadings.factors[k], fitted.params.loadings.factors[k]));
  const RelativeErrors re = relative_errors(vmat(fitted.params.loadings), fitted.params.b,
                                            fitted.params.sigma_f, fitted.params.sigma_e2, sim.truth);
  out.metrics.emplace_back("B_error", re.b_error);
  out.metrics.emplace_back("RE_e_x100", 100.0 * re.re_e);
  if (re.re_f) out.metrics.emplace_back("RE_f_x100", 100.0 * *re.re_f);
  out.metrics.emplace_back("time_s", elapsed);
  out.ok = true;
  return out;
}

MethodOutcome run_supsvd(const SimData& sim, const Dataset& centered, const FitConfig& cfg) {
  MethodOutcome out{Method::supsvd};
  const MultiwayArray flat = flatten_sample_modes(centered.x);
  const auto start = Clock::now();
  const FitResult fitted = fit(flat, centered.y, cfg);
  const double elapsed = seconds_since(start);
  const MultiwayArray flat_signal = fitted.signal();
  const MultiwayArray signal(sim.truth.signal.dims(),
                             std::vector<double>(flat_signal.values().begin(), flat_signal.values().end()));
  out.metrics.emplace_back("SE", signal_error(signal, sim.truth.signal));
  const RelativeErrors re = relative_errors(fitted.params.loadings.factors.front(), fitted.params.b,
                                            fitted.params.sigma_f, fitted.params.sigma_e2, sim.truth);
  out.metrics.emplace_back("B_error", re.b_error);
  out.metrics.emplace_back("RE_e_x100", 100.0 * re.re_e);
  if (re.re_f) out.metrics.emplace_back("RE_f_x100", 100.0 * *re.re_f);
  out.metrics.emplace_back("time_s", elapsed);
  out.ok = true;
  return out;
}

MethodOutcome run_cp(const SimData& sim, const Dataset& centered, const CpConfig& cfg,
                     const std::vector<std::uint64_t>& seeds) {
  MethodOutcome out{Method::cp};
  const auto start = Clock::now();
  std::optional<CpFit> best;
  for (std::uint64_t seed : seeds) {
    CpConfig c = cfg;
    c.seed = seed;
    CpFit candidate = cp_fit_als(centered.x, c);
    if (!best || candidate.rss < best->rss) best = std::move(candidate);
  }
  const CpFit& fitted = *best;
  const double elapsed = seconds_since(start);
  out.metrics.emplace_back("SE", signal_error(fitted.signal(), sim.truth.signal));
  for (std::size_t k = 0; k < sim.truth.loadings.order(); ++k)
    out.metrics.emplace_back("angle_V" + std::to_string(k + 1),
                             principal_angle(sim.truth.loadings.factors[k], fitted.loadings.factors[k]));
  out.metrics.emplace_back("time_s", elapsed);
  out.ok = true;
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::supcp: return "supcp";
    case Method::cp: return "cp";
    case Method::supsvd: return "supsvd";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "supcp") return Method::supcp;
  if (s == "cp") return Method::cp;
  if (s == "supsvd") return Method::supsvd;
  throw InvalidArgument("unknown method '" + s + "' (expected supcp, cp or supsvd)");
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  if (config.n_runs < 1) throw InvalidArgument("n_runs must be >= 1");
  if (config.methods.empty()) throw InvalidArgument("no methods requested");
  if (config.n_starts < 1 || config.cp_n_starts < 1) throw InvalidArgument("start counts must be >= 1");

  std::vector<std::vector<MethodOutcome>> per_run(static_cast<std::size_t>(config.n_runs));
  parallel_for(per_run.size(), resolve_jobs(config.jobs), [&](std::size_t run) {
    const SimData sim = generate_setting(config.setting, derive_seed(config.seed, run));
    const Dataset centered = center(sim.data).first;
    const int true_rank = static_cast<int>(sim.truth.u.cols());

    FitConfig fit_cfg = config.fit;
    fit_cfg.rank = true_rank;
    const std::uint64_t run_seed = derive_seed(config.seed ^ 0xa5a5a5a5ULL, run);
    const auto start_seeds = [run_seed](int count) {
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < count; ++s) seeds.push_back(derive_seed(run_seed, static_cast<std::uint64_t>(s)));
      return seeds;
    };
    fit_cfg.seeds = start_seeds(config.n_starts);
    const std::vector<std::uint64_t> cp_seeds = start_seeds(config.cp_n_starts);
    CpConfig cp_cfg;
    cp_cfg.rank = true_rank;
    cp_cfg.max_iters = config.cp_max_iters;
    cp_cfg.tol = config.cp_tol;

    for (Method m : config.methods) {
      try {
        switch (m) {
          case Method::supcp: per_run[run].push_back(run_supcp(sim, centered, fit_cfg)); break;
          case Method::cp: per_run[run].push_back(run_cp(sim, centered, cp_cfg, cp_seeds)); break;
          case Method::supsvd: per_run[run].push_back(run_supsvd(sim, centered, fit_cfg)); break;
        }
      } catch (const std::exception& e) {
        MethodOutcome failed{m};
        failed.error = "run " + std::to_string(run) + ", " + to_string(m) + ": " + e.what();
        per_run[run].push_back(std::move(failed));
      }
    }
  });

  BenchmarkReport report;
  std::map<std::string, std::vector<std::string>> metric_order;
  for (const auto& outcomes : per_run) {
    for (const auto& o : outcomes) {
      const std::string name = to_string(o.method);
      if (!o.ok) {
        ++report.failures[name];
        report.failure_messages.push_back(o.error);
        continue;
      }
      for (const auto& [metric, value] : o.metrics) {
        auto& order = metric_order[name];
        if (std::find(order.begin(), order.end(), metric) == order.end()) order.push_back(metric);
        report.samples[name][metric].push_back(value);
      }
    }
  }
  for (Method m : config.methods) {
    const std::string name = to_string(m);
    for (const auto& metric : metric_order[name]) {
      const auto& values = report.samples[name][metric];
      report.rows.push_back({m, metric, median(values), median_absolute_deviation(values),
                             static_cast<int>(values.size())});
    }
  }
  return report;
}

std::string InitVariant::label() const {
  return std::string(init == InitMethod::random ? "random" : "cp") + "_anneal" +
         std::to_string(anneal_iters);
}

std::vector<InitStudyRow> run_init_study(const InitStudyConfig& config) {
  if (config.n_datasets < 1) throw InvalidArgument("n_datasets must be >= 1");
  const std::size_t nv = config.variants.size();
  const auto nd = static_cast<std::size_t>(config.n_datasets);

  struct Cell {
    double ll[2] = {0.0, 0.0};
    double secs[2] = {0.0, 0.0};
  };
  std::vector<std::vector<Cell>> cells(nd, std::vector<Cell>(nv));

  parallel_for(nd, resolve_jobs(config.jobs), [&](std::size_t i) {
    const SimData sim = generate_init_sim(derive_seed(config.seed, i));
    for (std::size_t v = 0; v < nv; ++v) {
      for (int rep = 0; rep < 2; ++rep) {
        FitConfig cfg;
        cfg.rank = 2;
        cfg.init = config.variants[v].init;
        cfg.anneal_iters = config.variants[v].anneal_iters;
        cfg.anneal_scale = config.anneal_scale;
        cfg.max_iters = cfg.anneal_iters + config.post_anneal_iters;
        cfg.tol = config.tol;
        cfg.seeds = {derive_seed(config.seed + 1, 2 * i + static_cast<std::size_t>(rep))};
        const auto start = Clock::now();
        const FitResult fitted = fit(sim.data.x, sim.data.y, cfg);
        cells[i][v].secs[rep] = seconds_since(start);
        cells[i][v].ll[rep] = fitted.final_loglik();
      }
    }
  });

  std::vector<InitStudyRow> rows;
  for (std::size_t v = 0; v < nv; ++v) {
    InitStudyRow row;
    row.variant = config.variants[v];
    row.n_datasets = config.n_datasets;
    std::vector<double> lls, secs;
    for (std::size_t i = 0; i < nd; ++i) {
      const Cell& c = cells[i][v];
      lls.insert(lls.end(), {c.ll[0], c.ll[1]});
      secs.insert(secs.end(), {c.secs[0], c.secs[1]});
      row.differences.push_back(std::abs(c.ll[0] - c.ll[1]));
    }
    row.mean_loglik = mean_of(lls);
    row.sd_loglik = sd_of(lls);
    row.mean_abs_difference = mean_of(row.differences);
    row.sd_abs_difference = sd_of(row.differences);
    row.mean_seconds = mean_of(secs);
    row.sd_seconds = sd_of(secs);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace supcp
