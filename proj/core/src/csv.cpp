#include "supcp/errors.hpp"
#include "supcp/io.hpp"

#include <charconv>
#include <optional>

namespace supcp::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || end != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void fail(const std::string& what, std::uint64_t line) {
  throw FormatError(what + " at line " + std::to_string(line), line);
}

}  // namespace

Matrix parse_matrix_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::uint64_t line_no = 0;
  bool first_content_line = true;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto cells = split(line);
    std::vector<double> row;
    row.reserve(cells.size());
    std::optional<std::size_t> bad_cell;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_number(cells[c]);
      if (!value) {
        if (!bad_cell) bad_cell = c;
        continue;
      }
      row.push_back(*value);
    }

    if (first_content_line) {
      first_content_line = false;
      width = cells.size();
      if (bad_cell) continue;  // header
    }
    if (cells.size() != width)
      fail("ragged row: expected " + std::to_string(width) + " fields, found " + std::to_string(cells.size()),
           line_no);
    if (bad_cell)
      fail("non-numeric cell '" + std::string(trim(cells[*bad_cell])) + "' in column " +
               std::to_string(*bad_cell + 1),
           line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail("no numeric rows", line_no == 0 ? 1 : line_no);

  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) { return parse_matrix_csv(read_file(path)); }

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string format_matrix_csv(const Matrix& m, const std::vector<std::string>& header) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != m.cols())
    throw InvalidArgument("CSV header has " + std::to_string(header.size()) + " names for " +
                          std::to_string(m.cols()) + " columns");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  if (!header.empty()) out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header) {
  write_file_atomic(path, format_matrix_csv(m, header));
}

}  // namespace supcp::io
