#include "oracles.hpp"

#include "supcp/errors.hpp"
#include "supcp/io.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace supcp;
using namespace supcp::testing;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("supcp_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::uint64_t format_error_position(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.position();
  }
  ADD_FAILURE() << "no FormatError thrown";
  return 0;
}

}  // namespace

TEST(TensorFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  MultiwayArray x = random_array(rng, {3, 4, 5});
  x.data()[7] = -0.0;
  x.data()[8] = 5e-324;
  const auto path = temp_dir() / "x.mway";
  io::write_tensor(path, x);
  const MultiwayArray back = io::read_tensor(path);
  EXPECT_EQ(back.dims(), x.dims());
  EXPECT_EQ(std::memcmp(back.data(), x.data(), x.size() * sizeof(double)), 0);
}

TEST(TensorFile, HeaderLayout) {
  const auto bytes = io::encode_tensor(MultiwayArray({2, 1}, {1.0, 2.0}));
  ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 16u + 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MWAY");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[20], 1);
  // 1.0 = 0x3FF0000000000000, little-endian.
  EXPECT_EQ(bytes[28 + 7], 0x3F);
  EXPECT_EQ(bytes[28 + 6], 0xF0);
}

TEST(TensorFile, RejectsBadMagic) {
  auto bytes = io::encode_tensor(MultiwayArray({2, 2}));
  std::memcpy(bytes.data(), "XXXX", 4);
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), 0u);
}

TEST(TensorFile, RejectsBadVersion) {
  auto bytes = io::encode_tensor(MultiwayArray({2, 2}));
  bytes[4] = 2;
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), 4u);
}

TEST(TensorFile, RejectsEmptyDimsList) {
  auto bytes = io::encode_tensor(MultiwayArray({1}));
  bytes.resize(12);
  bytes[8] = 0;
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), 8u);
}

TEST(TensorFile, RejectsTruncatedPayload) {
  auto bytes = io::encode_tensor(MultiwayArray({3, 3}));
  bytes.resize(bytes.size() - 5);
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), bytes.size());
}

TEST(TensorFile, RejectsDimsOverflow) {
  auto bytes = io::encode_tensor(MultiwayArray({2, 2}));
  for (int i = 0; i < 8; ++i) bytes[20 + i] = 0xFF;
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), 20u);
}

TEST(TensorFile, RejectsZeroDimension) {
  auto bytes = io::encode_tensor(MultiwayArray({2, 2}));
  std::memset(bytes.data() + 12, 0, 8);
  EXPECT_EQ(format_error_position([&] { io::decode_tensor(bytes); }), 12u);
}

TEST(TensorFile, MissingFileIsInvalidArgument) {
  EXPECT_THROW(io::read_tensor(temp_dir() / "missing.mway"), InvalidArgument);
}

TEST(Csv, ParsesPlainMatrix) {
  EXPECT_EQ(io::parse_matrix_csv("1,2\n3,4"), (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(io::parse_matrix_csv("1, 2\r\n3 ,4\r\n\n"), (Matrix{{1, 2}, {3, 4}}));
}

TEST(Csv, SkipsHeaderRow) { EXPECT_EQ(io::parse_matrix_csv("a,b\n1,2\n3,4\n"), (Matrix{{1, 2}, {3, 4}})); }

TEST(Csv, RaggedRowReportsLine) {
  EXPECT_EQ(format_error_position([] { io::parse_matrix_csv("1,2\n3"); }), 2u);
}

TEST(Csv, NonNumericCellReportsLine) {
  EXPECT_EQ(format_error_position([] { io::parse_matrix_csv("a,b\n1,2\n3,x\n"); }), 3u);
  EXPECT_EQ(format_error_position([] { io::parse_matrix_csv(""); }), 1u);
}

TEST(Csv, WriteReadRoundTrip) {
  std::mt19937_64 rng(2);
  const Matrix m = random_matrix(rng, 7, 3);
  const auto path = temp_dir() / "m.csv";
  io::write_matrix_csv(path, m, {"a", "b", "c"});
  EXPECT_EQ(io::read_matrix_csv(path), m);
}

TEST(ModelDocument, RoundTripPreservesParameters) {
  std::mt19937_64 rng(3);
  for (bool full : {false, true}) {
    io::ModelDocument doc;
    doc.n_samples = 9;
    doc.dims = {3, 4};
    doc.params = random_params(rng, doc.dims, 2, 3, full);
    doc.centering.x_mean = random_matrix(rng, 12, 1);
    doc.centering.y_mean = random_matrix(rng, 3, 1);
    doc.fit.seeds = {1, 18446744073709551615ULL};
    doc.fit.loglik_trace = {-123.456789012345678, -120.0 / 7.0};
    doc.fit.n_iters = 2;

    const auto back = io::model_from_json(io::model_to_json(doc));
    EXPECT_EQ(back.params.loadings.factors, doc.params.loadings.factors);
    EXPECT_EQ(back.params.b, doc.params.b);
    EXPECT_EQ(back.params.sigma_f, doc.params.sigma_f);
    EXPECT_EQ(back.params.sigma_e2, doc.params.sigma_e2);
    EXPECT_EQ(back.params.diag_constraint, doc.params.diag_constraint);
    EXPECT_EQ(back.centering.x_mean, doc.centering.x_mean);
    EXPECT_EQ(back.fit.seeds, doc.fit.seeds);
    EXPECT_EQ(back.fit.loglik_trace, doc.fit.loglik_trace);
    EXPECT_EQ(io::model_to_json(back), io::model_to_json(doc));
  }
}

TEST(ModelDocument, RejectsMalformedDocuments) {
  EXPECT_THROW(io::model_from_json("{"), FormatError);
  EXPECT_THROW(io::model_from_json("{\"schema_version\": 1}"), FormatError);
  EXPECT_THROW(io::model_from_json("{\"schema_version\": 99}"), FormatError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.0}) EXPECT_EQ(std::stod(io::format_double(v)), v);
  EXPECT_EQ(io::format_double(0.1), "0.1");
}

TEST(AtomicWrite, LeavesNoTemporaryFiles) {
  const auto dir = temp_dir();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "out.txt", std::string_view("hello"));
  io::write_file_atomic(dir / "out.txt", std::string_view("again"));
  EXPECT_EQ(io::read_file(dir / "out.txt"), "again");
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator()), 1);
}
