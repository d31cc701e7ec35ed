#include "supcp/errors.hpp"
#include "supcp/io.hpp"

#include <nlohmann/json.hpp>

namespace supcp::io {

namespace {

using nlohmann::json;

json rows_of(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json vector_of(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

[[noreturn]] void schema_error(const std::string& what) {
  throw FormatError("model document: " + what, 0);
}

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) schema_error(std::string("missing field '") + name + "'");
  return j.at(name);
}

double number(const json& j, const char* what) {
  if (!j.is_number()) schema_error(std::string(what) + " must be a number");
  return j.get<double>();
}

Vector read_vector(const json& j, const char* what) {
  if (!j.is_array()) schema_error(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

Matrix read_rows(const json& j, Eigen::Index cols_if_empty, const char* what) {
  if (!j.is_array()) schema_error(std::string(what) + " must be an array of rows");
  if (j.empty()) return Matrix(0, cols_if_empty);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) schema_error(std::string(what) + " rows are ragged");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = number(j[i][c], what);
  }
  return m;
}

json loadings_json(const LoadingSet& loadings) {
  json out = json::array();
  for (const auto& v : loadings.factors) out.push_back(rows_of(v));
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

ModelDocument make_model_document(const FitResult& result, const FitConfig& config,
                                  std::size_t n_samples) {
  ModelDocument doc;
  doc.n_samples = n_samples;
  doc.dims = result.params.loadings.dims();
  doc.params = result.params;
  doc.centering = result.centering;
  doc.fit.seeds = config.seeds;
  doc.fit.chosen_seed = result.seed;
  doc.fit.init_method = config.init == InitMethod::cp ? "cp" : "random";
  doc.fit.anneal_iters = config.anneal_iters;
  doc.fit.anneal_scale = config.anneal_scale;
  doc.fit.max_iters = config.max_iters;
  doc.fit.tol = config.tol;
  doc.fit.n_iters = result.n_iters;
  doc.fit.converged = result.converged;
  doc.fit.loglik_trace = result.loglik_trace;
  return doc;
}

std::string model_to_json(const ModelDocument& doc) {
  const SupCpParams& p = doc.params;
  json j;
  j["schema_version"] = doc.schema_version;
  j["kind"] = "supcp_model";
  j["n_samples"] = doc.n_samples;
  j["dims"] = doc.dims;
  j["rank"] = p.rank();
  j["loadings"] = loadings_json(p.loadings);
  j["b"] = rows_of(p.b);
  j["diag_sigma_f"] = p.diag_constraint;
  j["sigma_f"] = p.diag_constraint ? vector_of(p.sigma_f.diagonal()) : rows_of(p.sigma_f);
  j["sigma_e2"] = p.sigma_e2;
  j["centering"] = {{"x_mean", vector_of(doc.centering.x_mean)}, {"y_mean", vector_of(doc.centering.y_mean)}};
  j["fit"] = {{"seeds", doc.fit.seeds},
              {"chosen_seed", doc.fit.chosen_seed},
              {"init", doc.fit.init_method},
              {"anneal_iters", doc.fit.anneal_iters},
              {"anneal_scale", doc.fit.anneal_scale},
              {"max_iters", doc.fit.max_iters},
              {"tol", doc.fit.tol},
              {"iterations", doc.fit.n_iters},
              {"converged", doc.fit.converged},
              {"loglik_trace", doc.fit.loglik_trace}};
  return dump(j);
}

ModelDocument model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model document is not valid JSON: ") + e.what(), e.byte);
  }

  ModelDocument doc;
  try {
    doc.schema_version = field(j, "schema_version").get<int>();
    if (doc.schema_version != kModelSchemaVersion)
      schema_error("unsupported schema version " + std::to_string(doc.schema_version));
    doc.n_samples = field(j, "n_samples").get<std::size_t>();
    doc.dims = field(j, "dims").get<Dims>();
    const auto rank = field(j, "rank").get<Eigen::Index>();

    const json& loadings = field(j, "loadings");
    if (!loadings.is_array() || loadings.size() != doc.dims.size())
      schema_error("loadings must hold one matrix per mode");
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < loadings.size(); ++k) {
      Matrix v = read_rows(loadings[k], rank, "loadings");
      if (v.rows() != static_cast<Eigen::Index>(doc.dims[k]) || v.cols() != rank)
        schema_error("loading matrix " + std::to_string(k + 1) + " has the wrong shape");
      factors.push_back(std::move(v));
    }

    SupCpParams& p = doc.params;
    p.loadings = LoadingSet(std::move(factors));
    p.b = read_rows(field(j, "b"), rank, "b");
    p.diag_constraint = field(j, "diag_sigma_f").get<bool>();
    const json& sf = field(j, "sigma_f");
    if (sf.is_array() && !sf.empty() && sf.front().is_number()) {
      p.sigma_f = read_vector(sf, "sigma_f").asDiagonal();
    } else {
      p.sigma_f = read_rows(sf, rank, "sigma_f");
    }
    p.sigma_e2 = number(field(j, "sigma_e2"), "sigma_e2");
    if (p.b.cols() != rank || p.sigma_f.rows() != rank || p.sigma_f.cols() != rank)
      schema_error("b or sigma_f does not match the rank");

    const json& c = field(j, "centering");
    doc.centering.x_mean = read_vector(field(c, "x_mean"), "x_mean");
    doc.centering.y_mean = read_vector(field(c, "y_mean"), "y_mean");
    if (doc.centering.y_mean.size() != p.b.rows()) schema_error("y_mean length does not match b");
    if (doc.centering.x_mean.size() != static_cast<Eigen::Index>(p.loadings.total_size()))
      schema_error("x_mean length does not match dims");

    const json& f = field(j, "fit");
    doc.fit.seeds = field(f, "seeds").get<std::vector<std::uint64_t>>();
    doc.fit.chosen_seed = field(f, "chosen_seed").get<std::uint64_t>();
    doc.fit.init_method = field(f, "init").get<std::string>();
    doc.fit.anneal_iters = field(f, "anneal_iters").get<int>();
    doc.fit.anneal_scale = f.value("anneal_scale", 1.0);
    doc.fit.max_iters = field(f, "max_iters").get<int>();
    doc.fit.tol = field(f, "tol").get<double>();
    doc.fit.n_iters = field(f, "iterations").get<int>();
    doc.fit.converged = field(f, "converged").get<bool>();
    doc.fit.loglik_trace = field(f, "loglik_trace").get<std::vector<double>>();
  } catch (const json::exception& e) {
    schema_error(e.what());
  }
  try {
    doc.params.validate();
  } catch (const std::exception& e) {
    schema_error(e.what());
  }
  return doc;
}

void write_model(const std::filesystem::path& path, const ModelDocument& doc) {
  write_file_atomic(path, model_to_json(doc));
}

ModelDocument read_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

std::string cp_fit_to_json(const CpFit& fit, const CpConfig& config, const Centering& centering) {
  json j;
  j["kind"] = "cp_fit";
  j["rank"] = config.rank;
  j["dims"] = fit.loadings.dims();
  j["u"] = rows_of(fit.u);
  j["loadings"] = loadings_json(fit.loadings);
  j["rss"] = fit.rss;
  j["seed"] = config.seed;
  j["max_iters"] = config.max_iters;
  j["tol"] = config.tol;
  j["iterations"] = fit.n_iters;
  j["converged"] = fit.converged;
  j["rss_trace"] = fit.rss_trace;
  j["centering"] = {{"x_mean", vector_of(centering.x_mean)}};
  return dump(j);
}

std::string truth_to_json(const SimTruth& truth, const std::string& scheme, std::uint64_t seed) {
  json j;
  j["kind"] = "simulation_truth";
  j["scheme"] = scheme;
  j["seed"] = seed;
  j["dims"] = truth.loadings.dims();
  j["rank"] = truth.loadings.rank();
  j["u"] = rows_of(truth.u);
  j["loadings"] = loadings_json(truth.loadings);
  j["b"] = rows_of(truth.b);
  j["sigma_f"] = rows_of(truth.sigma_f);
  j["sigma_e2"] = truth.sigma_e2;
  return dump(j);
}

std::string rank_report_to_json(const RankSelectionReport& report) {
  auto optionals = [](const std::vector<std::optional<double>>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(x ? json(*x) : json(nullptr));
    return out;
  };
  json j;
  j["kind"] = "rank_selection";
  j["candidate_ranks"] = report.candidate_ranks;
  j["test_logliks"] = optionals(report.test_logliks);
  j["train_logliks"] = optionals(report.train_logliks);
  j["chosen_rank"] = report.chosen_rank;
  j["split_seed"] = report.split_seed;
  j["train_fraction"] = report.train_fraction;
  j["failures"] = report.failures;
  return dump(j);
}

std::string benchmark_rows_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "method,metric,median,mad,n_runs\n";
  for (const auto& r : rows)
    out += to_string(r.method) + "," + r.metric + "," + format_double(r.median) + "," + format_double(r.mad) +
           "," + std::to_string(r.n_runs) + "\n";
  return out;
}

std::string init_study_csv(const std::vector<InitStudyRow>& rows) {
  std::string out =
      "variant,init,anneal_iters,mean_loglik,sd_loglik,mean_abs_diff,sd_abs_diff,mean_seconds,sd_seconds,"
      "n_datasets\n";
  for (const auto& r : rows) {
    out += r.variant.label() + "," + (r.variant.init == InitMethod::cp ? "cp" : "random") + "," +
           std::to_string(r.variant.anneal_iters) + "," + format_double(r.mean_loglik) + "," +
           format_double(r.sd_loglik) + "," + format_double(r.mean_abs_difference) + "," +
           format_double(r.sd_abs_difference) + "," + format_double(r.mean_seconds) + "," +
           format_double(r.sd_seconds) + "," + std::to_string(r.n_datasets) + "\n";
  }
  return out;
}

}  // namespace supcp::io
