#include "slr/matrix_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace slr {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("unexpected end of stream reading u32");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  const uint64_t u = std::bit_cast<uint64_t>(v);
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  uint8_t b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("unexpected end of stream reading f64");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

void expect_magic(std::istream& in, const char* magic) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) {
    throw IoError(std::string("bad magic, expected ") + magic);
  }
}

template <typename Fn>
void with_output_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  fn(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

template <typename Fn>
auto with_input_file(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return fn(in);
}

}  // namespace

BinaryMask::BinaryMask(Index rows, Index cols, bool fill)
    : rows_(rows), cols_(cols),
      bits_(static_cast<size_t>((rows * cols + 7) / 8),
            fill ? uint8_t{0xFF} : uint8_t{0}) {
  if (fill) {
    // Clear padding bits beyond rows*cols so equality stays well defined.
    const Index total = rows * cols;
    for (Index k = total; k < static_cast<Index>(bits_.size()) * 8; ++k) {
      bits_[static_cast<size_t>(k / 8)] &=
          static_cast<uint8_t>(~(1u << (k % 8)));
    }
  }
}

bool BinaryMask::get(Index i, Index j) const {
  const Index k = i * cols_ + j;
  return (bits_[static_cast<size_t>(k / 8)] >> (k % 8)) & 1u;
}

void BinaryMask::set(Index i, Index j, bool value) {
  const Index k = i * cols_ + j;
  if (value) {
    bits_[static_cast<size_t>(k / 8)] |= static_cast<uint8_t>(1u << (k % 8));
  } else {
    bits_[static_cast<size_t>(k / 8)] &=
        static_cast<uint8_t>(~(1u << (k % 8)));
  }
}

Index BinaryMask::count() const {
  Index total = 0;
  for (uint8_t b : bits_) total += std::popcount(b);
  return total;
}

Index BinaryMask::count_in_col(Index j) const {
  Index total = 0;
  for (Index i = 0; i < rows_; ++i) total += get(i, j) ? 1 : 0;
  return total;
}

Index BinaryMask::count_in_row(Index i) const {
  Index total = 0;
  for (Index j = 0; j < cols_; ++j) total += get(i, j) ? 1 : 0;
  return total;
}

IndexSet BinaryMask::col_indices(Index j) const {
  IndexSet out;
  for (Index i = 0; i < rows_; ++i) {
    if (get(i, j)) out.push_back(i);
  }
  return out;
}

void write_slrm(std::ostream& out, const Matrix& m) {
  out.write("SLRM", 4);
  put_u32(out, static_cast<uint32_t>(m.rows()));
  put_u32(out, static_cast<uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

Matrix read_slrm(std::istream& in) {
  expect_magic(in, "SLRM");
  const Index rows = get_u32(in);
  const Index cols = get_u32(in);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = get_f64(in);
  }
  return m;
}

void write_slrm_file(const std::string& path, const Matrix& m) {
  with_output_file(path, [&](std::ostream& out) { write_slrm(out, m); });
}

Matrix read_slrm_file(const std::string& path) {
  return with_input_file(path, [&](std::istream& in) { return read_slrm(in); });
}

void write_mask(std::ostream& out, const BinaryMask& mask) {
  out.write("SLRK", 4);
  put_u32(out, static_cast<uint32_t>(mask.rows()));
  put_u32(out, static_cast<uint32_t>(mask.cols()));
  out.write(reinterpret_cast<const char*>(mask.bytes().data()),
            static_cast<std::streamsize>(mask.bytes().size()));
}

BinaryMask read_mask(std::istream& in) {
  expect_magic(in, "SLRK");
  const Index rows = get_u32(in);
  const Index cols = get_u32(in);
  BinaryMask mask(rows, cols);
  in.read(reinterpret_cast<char*>(mask.bytes().data()),
          static_cast<std::streamsize>(mask.bytes().size()));
  if (!in) throw IoError("unexpected end of stream reading mask payload");
  return mask;
}

void write_mask_file(const std::string& path, const BinaryMask& mask) {
  with_output_file(path, [&](std::ostream& out) { write_mask(out, mask); });
}

BinaryMask read_mask_file(const std::string& path) {
  return with_input_file(path, [&](std::istream& in) { return read_mask(in); });
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(std::strtod(cell.c_str(), nullptr));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged CSV row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return m;
}

void write_csv_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_csv(out, m);
}

Matrix read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return read_csv(in);
}

void write_frame(std::ostream& out, const Vector& frame) {
  put_u32(out, static_cast<uint32_t>(frame.size()));
  for (Index i = 0; i < frame.size(); ++i) put_f64(out, frame(i));
}

std::optional<Vector> FrameReader::next() {
  uint8_t b[4];
  in_.read(reinterpret_cast<char*>(b), 4);
  if (in_.gcount() == 0 && in_.eof()) return std::nullopt;
  if (!in_) throw IoError("truncated frame header");
  const uint32_t count = static_cast<uint32_t>(b[0]) |
                         (static_cast<uint32_t>(b[1]) << 8) |
                         (static_cast<uint32_t>(b[2]) << 16) |
                         (static_cast<uint32_t>(b[3]) << 24);
  Vector frame(count);
  for (uint32_t i = 0; i < count; ++i) frame(i) = get_f64(in_);
  return frame;
}

}  // namespace slr
