#include "supcp/cp_als.hpp"
#include "supcp/errors.hpp"
#include "supcp/io.hpp"
#include "supcp/model_selection.hpp"
#include "supcp/simulation.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace supcp;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
T parse_scalar(std::string_view text, const std::string& flag) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size())
    throw UsageError(flag + ": cannot parse '" + std::string(text) + "'");
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    out.push_back(parse_scalar<T>(rest.substr(0, comma), flag));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

/// "3", "1,2,5" or the inclusive range "1..10".
std::vector<int> parse_ranks(const std::string& text) {
  const std::size_t dots = text.find("..");
  if (dots == std::string::npos) return parse_list<int>(text, "--ranks");
  const int lo = parse_scalar<int>(std::string_view(text).substr(0, dots), "--ranks");
  const int hi = parse_scalar<int>(std::string_view(text).substr(dots + 2), "--ranks");
  if (lo > hi) throw UsageError("--ranks: empty range " + text);
  std::vector<int> out;
  for (int r = lo; r <= hi; ++r) out.push_back(r);
  return out;
}

struct FitOptions {
  int rank = 1;
  int max_iters = 1000;
  double tol = 1e-8;
  int anneal = 100;
  double anneal_scale = 1.0;
  std::string init = "random";
  std::uint64_t seed = 0;
  std::string seeds;
  bool full_sigma_f = false;
  int cp_max_iters = 500;

  void add_to(CLI::App* cmd, bool with_rank) {
    if (with_rank) cmd->add_option("--rank", rank, "Number of components")->required();
    cmd->add_option("--max-iters", max_iters, "EM iteration cap")->capture_default_str();
    cmd->add_option("--tol", tol, "Relative log-likelihood tolerance")->capture_default_str();
    cmd->add_option("--anneal", anneal, "Annealing iterations")->capture_default_str();
    cmd->add_option("--anneal-scale", anneal_scale, "Annealing noise sd at iteration l is scale * sigma_e / l")
        ->capture_default_str();
    cmd->add_option("--init", init, "Initialization: random or cp")
        ->check(CLI::IsMember({"random", "cp"}))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--seeds", seeds, "Comma-separated seeds for multiple starts (overrides --seed)");
    cmd->add_flag("--full-sigma-f", full_sigma_f, "Estimate an unrestricted Sigma_f");
    cmd->add_option("--cp-max-iters", cp_max_iters, "Iteration cap of the CP initializer")
        ->capture_default_str();
  }

  FitConfig config() const {
    FitConfig cfg;
    cfg.rank = rank;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.anneal_iters = anneal;
    cfg.anneal_scale = anneal_scale;
    cfg.init = init == "cp" ? InitMethod::cp : InitMethod::random;
    cfg.seeds = seeds.empty() ? std::vector<std::uint64_t>{seed} : parse_list<std::uint64_t>(seeds, "--seeds");
    cfg.diag_sigma_f = !full_sigma_f;
    cfg.cp_max_iters = cp_max_iters;
    cfg.validate();
    return cfg;
  }
};

Dataset load_dataset(const std::string& x_path, const std::string& y_path) {
  MultiwayArray x = io::read_tensor(x_path);
  if (x.order() < 2) throw InvalidArgument("data array needs a sample mode and at least one more mode");
  Matrix y = y_path.empty() ? Matrix(static_cast<Eigen::Index>(x.dim(0)), 0) : io::read_matrix_csv(y_path);
  if (static_cast<std::size_t>(y.rows()) != x.dim(0))
    throw InvalidArgument("covariate file has " + std::to_string(y.rows()) + " rows but the array has " +
                          std::to_string(x.dim(0)) + " samples");
  return {std::move(x), std::move(y)};
}

void report_diagnostics(const std::vector<std::string>& diagnostics, bool verbose) {
  if (diagnostics.empty()) return;
  if (verbose) {
    for (const auto& d : diagnostics) std::cerr << "warning: " << d << "\n";
  } else {
    std::cerr << "warning: " << diagnostics.front();
    if (diagnostics.size() > 1) std::cerr << " (+" << diagnostics.size() - 1 << " more, use --verbose)";
    std::cerr << "\n";
  }
}

std::string sibling(const std::string& path, const std::string& extension) {
  std::filesystem::path p(path);
  p.replace_extension(extension);
  return p.string();
}

struct Scheme {
  enum Kind { setting, rank, init } kind = setting;
  int value = 1;
};

Scheme parse_scheme(const std::string& text) {
  if (text == "init") return {Scheme::init, 0};
  if (text.rfind("setting", 0) == 0) {
    const int k = parse_scalar<int>(std::string_view(text).substr(7), "--scheme");
    if (k < 1 || k > 4) throw UsageError("--scheme: settings are setting1..setting4");
    return {Scheme::setting, k};
  }
  if (text.rfind("rank:", 0) == 0) return {Scheme::rank, parse_scalar<int>(std::string_view(text).substr(5), "--scheme")};
  throw UsageError("--scheme must be setting1..setting4, rank:<R> or init");
}

std::string format_table(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-10s %14s %12s %6s\n", "method", "metric", "median", "MAD", "runs");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-8s %-10s %14.4f %12.4f %6d\n", to_string(r.method).c_str(),
                  r.metric.c_str(), r.median, r.mad, r.n_runs);
    out << line;
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised CP factorization of multiway data"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print every diagnostic");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a supervised CP model by EM");
  std::string x_path, y_path, out_path;
  FitOptions fit_opts;
  fit_cmd->add_option("--x", x_path, "Data array (.mway)")->required();
  fit_cmd->add_option("--y", y_path, "Covariates (CSV, one row per sample)");
  fit_cmd->add_option("--out", out_path, "Model document (JSON)")->required();
  fit_opts.add_to(fit_cmd, true);

  // cp
  auto* cp_cmd = app.add_subcommand("cp", "Unsupervised CP fit by alternating least squares");
  CpConfig cp_cfg;
  cp_cmd->add_option("--x", x_path, "Data array (.mway)")->required();
  cp_cmd->add_option("--rank", cp_cfg.rank, "Number of components")->required();
  cp_cmd->add_option("--max-iters", cp_cfg.max_iters, "Sweep cap")->capture_default_str();
  cp_cmd->add_option("--tol", cp_cfg.tol, "Relative RSS tolerance")->capture_default_str();
  cp_cmd->add_option("--seed", cp_cfg.seed, "Random seed")->capture_default_str();
  cp_cmd->add_option("--out", out_path, "CP fit document (JSON)")->required();

  // rank-select
  auto* rank_cmd = app.add_subcommand("rank-select", "Choose the rank by held-out log-likelihood");
  std::string ranks_text = "1..10", csv_path;
  SplitOptions split;
  unsigned jobs = 1;
  FitOptions rank_opts;
  rank_cmd->add_option("--x", x_path, "Data array (.mway)")->required();
  rank_cmd->add_option("--y", y_path, "Covariates (CSV)");
  rank_cmd->add_option("--ranks", ranks_text, "Candidates: R, R1,R2,.. or lo..hi")->capture_default_str();
  rank_cmd->add_option("--train-frac", split.train_fraction, "Training fraction")->capture_default_str();
  rank_cmd->add_option("--split-seed", split.seed, "Seed of the random split")->capture_default_str();
  rank_cmd->add_option("--out", out_path, "Report (JSON)")->required();
  rank_cmd->add_option("--csv", csv_path, "rank,test_loglik CSV (default: report path with .csv)");
  rank_cmd->add_option("--jobs", jobs, "Concurrent fits (SUPCP_JOBS overrides)")->capture_default_str();
  rank_opts.add_to(rank_cmd, false);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a simulated dataset with its truth");
  std::string scheme_text, prefix;
  std::uint64_t seed = 0;
  sim_cmd->add_option("--scheme", scheme_text, "setting1..setting4, rank:<R> or init")->required();
  sim_cmd->add_option("--seed", seed, "Generator seed")->capture_default_str();
  sim_cmd->add_option("--out-prefix", prefix, "Writes P.mway, P_y.csv and P_truth.json")->required();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Replicate a simulation setting and compare methods");
  int runs = 100;
  int starts_per_fit = 5, cp_starts_per_fit = 1;
  std::string methods_text = "supcp,cp,supsvd";
  FitOptions bench_opts;
  bench_cmd->add_option("--scheme", scheme_text, "setting1..setting4")->required();
  bench_cmd->add_option("--runs", runs, "Replicates")->capture_default_str();
  bench_cmd->add_option("--methods", methods_text, "Comma-separated: supcp, cp, supsvd")->capture_default_str();
  bench_cmd->add_option("--seed", seed, "Study seed")->capture_default_str();
  bench_cmd->add_option("--max-iters", bench_opts.max_iters, "EM iteration cap")->capture_default_str();
  bench_cmd->add_option("--tol", bench_opts.tol, "EM tolerance")->capture_default_str();
  bench_cmd->add_option("--anneal", bench_opts.anneal, "Annealing iterations")->capture_default_str();
  bench_cmd->add_option("--anneal-scale", bench_opts.anneal_scale, "Annealing noise multiplier")->capture_default_str();
  bench_cmd->add_option("--init", bench_opts.init, "random or cp")
      ->check(CLI::IsMember({"random", "cp"}))
      ->capture_default_str();
  bench_cmd->add_option("--restarts", starts_per_fit, "Starts per SupCP/SupSVD fit; the best one is kept")
      ->capture_default_str();
  bench_cmd->add_option("--cp-restarts", cp_starts_per_fit, "Starts per CP fit")->capture_default_str();
  bench_cmd->add_option("--out", csv_path, "Also write the CSV here");
  bench_cmd->add_option("--jobs", jobs, "Concurrent replicates (SUPCP_JOBS overrides)")->capture_default_str();

  // init-study
  auto* init_cmd = app.add_subcommand("init-study", "Compare initialization and annealing variants");
  InitStudyConfig init_cfg;
  std::string anneal_values = "0,100,500", starts = "random,cp";
  init_cmd->add_option("--datasets", init_cfg.n_datasets, "Simulated datasets")->capture_default_str();
  init_cmd->add_option("--seed", init_cfg.seed, "Study seed")->capture_default_str();
  init_cmd->add_option("--anneal-values", anneal_values, "Annealing lengths")->capture_default_str();
  init_cmd->add_option("--starts", starts, "Initializations")->capture_default_str();
  init_cmd->add_option("--post-anneal-iters", init_cfg.post_anneal_iters, "Iterations after annealing")
      ->capture_default_str();
  init_cmd->add_option("--anneal-scale", init_cfg.anneal_scale, "Annealing noise multiplier")->capture_default_str();
  init_cmd->add_option("--out", csv_path, "CSV output (default: standard output)");
  init_cmd->add_option("--jobs", jobs, "Concurrent datasets (SUPCP_JOBS overrides)")->capture_default_str();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Log-likelihood of data under a fitted model");
  std::string model_path;
  eval_cmd->add_option("--model", model_path, "Model document")->required();
  eval_cmd->add_option("--x", x_path, "Data array (.mway)")->required();
  eval_cmd->add_option("--y", y_path, "Covariates (CSV)");

  // construct
  auto* construct_cmd = app.add_subcommand("construct", "Conditional-mean array for given covariates");
  std::string y_values;
  construct_cmd->add_option("--model", model_path, "Model document")->required();
  construct_cmd->add_option("--y-values", y_values, "Centered covariate values v1,...,vq")->required();
  construct_cmd->add_option("--out", out_path, "Output array (.mway)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) {
      const FitConfig cfg = fit_opts.config();
      const Dataset data = load_dataset(x_path, y_path);
      const FitResult result = fit(data.x, data.y, cfg);
      report_diagnostics(result.diagnostics, verbose);
      io::write_model(out_path, io::make_model_document(result, cfg, data.n_samples()));
      std::cerr << "rank " << cfg.rank << ": log-likelihood " << io::format_double(result.final_loglik())
                << " after " << result.n_iters << " iterations"
                << (result.converged ? "" : " (not converged)") << "\n";
    } else if (cp_cmd->parsed()) {
      const Dataset data = load_dataset(x_path, "");
      const auto [centered, centering] = center(data);
      const CpFit result = cp_fit_als(centered.x, cp_cfg);
      report_diagnostics(result.diagnostics, verbose);
      io::write_file_atomic(out_path, io::cp_fit_to_json(result, cp_cfg, centering));
      std::cerr << "rank " << cp_cfg.rank << ": rss " << io::format_double(result.rss) << " after "
                << result.n_iters << " sweeps" << (result.converged ? "" : " (not converged)") << "\n";
    } else if (rank_cmd->parsed()) {
      const std::vector<int> ranks = parse_ranks(ranks_text);
      rank_opts.rank = ranks.front();
      const FitConfig cfg = rank_opts.config();
      const Dataset data = load_dataset(x_path, y_path);
      const RankSelectionReport report = select_rank(data, ranks, cfg, split, jobs);
      for (const auto& f : report.failures) std::cerr << "warning: " << f << "\n";
      io::write_file_atomic(out_path, io::rank_report_to_json(report));
      std::string csv = "rank,test_loglik\n";
      for (std::size_t i = 0; i < ranks.size(); ++i)
        csv += std::to_string(ranks[i]) + "," +
               (report.test_logliks[i] ? io::format_double(*report.test_logliks[i]) : std::string("nan")) + "\n";
      io::write_file_atomic(csv_path.empty() ? sibling(out_path, ".csv") : csv_path, csv);
      std::cerr << "chosen rank " << report.chosen_rank << "\n";
    } else if (sim_cmd->parsed()) {
      const Scheme scheme = parse_scheme(scheme_text);
      const SimData sim = scheme.kind == Scheme::setting ? generate_setting(scheme.value, seed)
                          : scheme.kind == Scheme::rank  ? generate_rank_sim(scheme.value, seed)
                                                         : generate_init_sim(seed);
      io::write_tensor(prefix + ".mway", sim.data.x);
      io::write_matrix_csv(prefix + "_y.csv", sim.data.y);
      io::write_file_atomic(prefix + "_truth.json", io::truth_to_json(sim.truth, scheme_text, seed));
    } else if (bench_cmd->parsed()) {
      const Scheme scheme = parse_scheme(scheme_text);
      if (scheme.kind != Scheme::setting) throw UsageError("bench supports setting1..setting4");
      BenchmarkConfig cfg;
      cfg.setting = scheme.value;
      cfg.n_runs = runs;
      cfg.n_starts = starts_per_fit;
      cfg.cp_n_starts = cp_starts_per_fit;
      cfg.seed = seed;
      cfg.methods.clear();
      for (const auto& name : CLI::detail::split(methods_text, ',')) cfg.methods.push_back(method_from_string(name));
      bench_opts.seeds.clear();
      cfg.fit = bench_opts.config();
      cfg.jobs = jobs;
      const BenchmarkReport report = run_benchmark(cfg);
      for (const auto& msg : report.failure_messages) std::cerr << "warning: " << msg << "\n";
      const std::string csv = io::benchmark_rows_csv(report.rows);
      if (!csv_path.empty()) io::write_file_atomic(csv_path, csv);
      std::cout << csv << "\n" << format_table(report.rows);
    } else if (init_cmd->parsed()) {
      init_cfg.variants.clear();
      const auto anneals = parse_list<int>(anneal_values, "--anneal-values");
      for (const auto& start : CLI::detail::split(starts, ',')) {
        if (start != "random" && start != "cp") throw UsageError("--starts: expected random and/or cp");
        for (int a : anneals)
          init_cfg.variants.push_back({start == "cp" ? InitMethod::cp : InitMethod::random, a});
      }
      init_cfg.jobs = jobs;
      const std::string csv = io::init_study_csv(run_init_study(init_cfg));
      if (csv_path.empty())
        std::cout << csv;
      else
        io::write_file_atomic(csv_path, csv);
    } else if (eval_cmd->parsed()) {
      const io::ModelDocument model = io::read_model(model_path);
      const Dataset data = load_dataset(x_path, y_path);
      const Dataset centered = apply_centering(data, model.centering);
      std::cout << io::format_double(marginal_loglik(centered.x, centered.y, model.params)) << "\n";
    } else if (construct_cmd->parsed()) {
      const io::ModelDocument model = io::read_model(model_path);
      const auto values = parse_list<double>(y_values, "--y-values");
      const Vector y = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
      if (y.size() != model.params.b.rows())
        throw UsageError("--y-values: model has " + std::to_string(model.params.b.rows()) + " covariates, got " +
                         std::to_string(y.size()));
      MultiwayArray recon = conditional_mean(y, model.params);
      auto row = recon.sample_matrix();
      row.row(0) += model.centering.x_mean.transpose();
      io::write_tensor(out_path, recon);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
