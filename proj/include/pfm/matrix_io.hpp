#pragma once

// Binary matrix files and CSV tables.
//
// Binary layout: 8-byte magic "PFMMAT01", u64 rows, u64 cols (little endian),
// then rows*cols IEEE-754 doubles in row-major order.

#include "pfm/common.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

namespace pfm {

namespace detail {

inline constexpr char matrix_magic[8] = {'P', 'F', 'M', 'M', 'A', 'T', '0', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

} // namespace detail

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(detail::matrix_magic, 8);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) detail::put_le<double>(out, m(i, j));
  if (!out) throw InputError("write failed: " + path.string());
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::matrix_magic, 8) != 0)
    throw InputError(path.string() + ": not a PFMMAT01 matrix file");
  const auto rows = detail::get_le<std::uint64_t>(in);
  const auto cols = detail::get_le<std::uint64_t>(in);
  if (!in) throw InputError(path.string() + ": truncated header");
  const auto size = std::filesystem::file_size(path);
  if (size < 24 || (cols != 0 && rows > (size - 24) / 8 / cols)) throw InputError(path.string() + ": payload shorter than declared size");
  if (size != 24 + rows * cols * 8) throw InputError(path.string() + ": payload size does not match header");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = detail::get_le<double>(in);
  if (!in) throw InputError(path.string() + ": truncated payload");
  return m;
}

/// Row-oriented CSV writer; doubles are printed with 17 significant digits.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw InputError("cannot write " + path.string());
    out_.imbue(std::locale::classic());
    out_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw InputError("write failed: " + path_.string());
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError("CSV has no column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw InputError(path.string() + ": row with " + std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (first) throw InputError(path.string() + ": empty CSV");
  return table;
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("not a number: '" + s + "'");
  return v;
}

inline Index parse_index(const std::string& s) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("not an integer: '" + s + "'");
  return v;
}

} // namespace pfm
