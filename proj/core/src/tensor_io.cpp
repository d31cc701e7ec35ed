#include "supcp/errors.hpp"
#include "supcp/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unistd.h>

namespace supcp::io {

namespace {

constexpr unsigned char kMagic[4] = {'M', 'W', 'A', 'Y'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const unsigned char> bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

[[noreturn]] void fail(const std::string& what, std::uint64_t offset) {
  throw FormatError(what + " at byte offset " + std::to_string(offset), offset);
}

void need(std::span<const unsigned char> bytes, std::size_t offset, std::size_t count, const char* what) {
  if (bytes.size() < offset + count)
    fail(std::string("truncated ") + what + " (file has " + std::to_string(bytes.size()) +
                          " bytes)",
                      bytes.size());
}

}  // namespace

std::vector<unsigned char> encode_tensor(const MultiwayArray& x) {
  std::vector<unsigned char> out;
  out.reserve(12 + 8 * x.order() + 8 * x.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(x.order()));
  for (std::size_t d : x.dims()) put_le<std::uint64_t>(out, d);
  for (double v : x.values()) put_le<double>(out, v);
  return out;
}

MultiwayArray decode_tensor(std::span<const unsigned char> bytes) {
  need(bytes, 0, 4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail("bad magic (expected \"MWAY\")", 0);
  need(bytes, 4, 4, "header");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorFormatVersion)
    fail("unsupported version " + std::to_string(version), 4);
  need(bytes, 8, 4, "header");
  const auto order = get_le<std::uint32_t>(bytes, 8);
  if (order == 0) fail("zero-length dims list", 8);

  Dims dims(order);
  std::uint64_t count = 1;
  std::size_t offset = 12;
  for (std::uint32_t k = 0; k < order; ++k, offset += 8) {
    need(bytes, offset, 8, "dims");
    const auto d = get_le<std::uint64_t>(bytes, offset);
    if (d == 0) fail("dimension " + std::to_string(k + 1) + " is zero", offset);
    if (count > std::numeric_limits<std::uint64_t>::max() / 8 / d)
      fail("dims overflow", offset);
    count *= d;
    dims[k] = static_cast<std::size_t>(d);
  }

  const std::size_t payload = bytes.size() - offset;
  if (payload < count * 8)
    fail("truncated payload: expected " + std::to_string(count * 8) + " bytes, found " +
                          std::to_string(payload),
                      bytes.size());
  if (payload > count * 8) fail("trailing bytes after payload", offset + count * 8);

  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = get_le<double>(bytes, offset + 8 * i);
  return MultiwayArray(std::move(dims), std::move(values));
}

MultiwayArray read_tensor(const std::filesystem::path& path) {
  const std::string contents = read_file(path);
  return decode_tensor({reinterpret_cast<const unsigned char*>(contents.data()), contents.size()});
}

void write_tensor(const std::filesystem::path& path, const MultiwayArray& x) {
  write_file_atomic(path, std::span<const unsigned char>(encode_tensor(x)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw InvalidArgument("error reading '" + path.string() + "'");
  return contents;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InvalidArgument("error writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InvalidArgument("cannot move output into place at '" + path.string() + "'");
  }
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> contents) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(contents.data()), contents.size()));
}

}  // namespace supcp::io
