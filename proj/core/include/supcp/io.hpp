#pragma once

#include "supcp/cp_als.hpp"
#include "supcp/model.hpp"
#include "supcp/model_selection.hpp"
#include "supcp/simulation.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace supcp::io {

// ---- binary tensor container -------------------------------------------------
//
// Layout, all little-endian:
//   bytes 0..3   magic "MWAY"
//   bytes 4..7   u32 version (1)
//   bytes 8..11  u32 order K (>= 1)
//   next 8K      u64 dims
//   payload      prod(dims) IEEE-754 doubles, mode-1-fastest

inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<unsigned char> encode_tensor(const MultiwayArray& x);
MultiwayArray decode_tensor(std::span<const unsigned char> bytes);

MultiwayArray read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const MultiwayArray& x);

// ---- CSV matrices --------------------------------------------------------------

/// Rectangular numeric CSV. A first row containing any non-numeric cell is
/// treated as a header and skipped.
Matrix parse_matrix_csv(std::string_view text);
Matrix read_matrix_csv(const std::filesystem::path& path);
std::string format_matrix_csv(const Matrix& m, const std::vector<std::string>& header = {});
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// ---- structured documents --------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

struct FitMetadata {
  std::vector<std::uint64_t> seeds;
  std::uint64_t chosen_seed = 0;
  std::string init_method = "random";
  int anneal_iters = 0;
  double anneal_scale = 1.0;
  int max_iters = 0;
  double tol = 0.0;
  int n_iters = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
};

struct ModelDocument {
  int schema_version = kModelSchemaVersion;
  std::size_t n_samples = 0;
  Dims dims;  ///< per-sample dims d_1..d_K
  SupCpParams params;
  Centering centering;
  FitMetadata fit;
};

ModelDocument make_model_document(const FitResult& result, const FitConfig& config,
                                  std::size_t n_samples);
std::string model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(std::string_view text);
void write_model(const std::filesystem::path& path, const ModelDocument& doc);
ModelDocument read_model(const std::filesystem::path& path);

std::string cp_fit_to_json(const CpFit& fit, const CpConfig& config, const Centering& centering);
std::string truth_to_json(const SimTruth& truth, const std::string& scheme, std::uint64_t seed);
std::string rank_report_to_json(const RankSelectionReport& report);
std::string benchmark_rows_csv(const std::vector<BenchmarkRow>& rows);
std::string init_study_csv(const std::vector<InitStudyRow>& rows);

/// Write through a temporary file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace supcp::io
