#pragma once

#include "slr/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace slr {

/// Dense boolean mask over an n x d matrix, bit-packed row-major, LSB first.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(Index rows, Index cols, bool fill = false);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool get(Index i, Index j) const;
  void set(Index i, Index j, bool value);
  Index count() const;
  Index count_in_col(Index j) const;
  Index count_in_row(Index i) const;
  IndexSet col_indices(Index j) const;

  const std::vector<uint8_t>& bytes() const { return bits_; }
  std::vector<uint8_t>& bytes() { return bits_; }

  bool operator==(const BinaryMask& other) const = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<uint8_t> bits_;
};

// SLRM container: magic "SLRM", u32 rows, u32 cols, row-major f64 payload.
// All integers and floats little-endian.
void write_slrm(std::ostream& out, const Matrix& m);
Matrix read_slrm(std::istream& in);
void write_slrm_file(const std::string& path, const Matrix& m);
Matrix read_slrm_file(const std::string& path);

// Mask container: magic "SLRK", u32 rows, u32 cols, bit-packed payload.
void write_mask(std::ostream& out, const BinaryMask& mask);
BinaryMask read_mask(std::istream& in);
void write_mask_file(const std::string& path, const BinaryMask& mask);
BinaryMask read_mask_file(const std::string& path);

// CSV interop for matrices; values printed with enough digits to round-trip.
void write_csv(std::ostream& out, const Matrix& m);
Matrix read_csv(std::istream& in);
void write_csv_file(const std::string& path, const Matrix& m);
Matrix read_csv_file(const std::string& path);

/// Frame stream framing: u32 count followed by count little-endian f64.
void write_frame(std::ostream& out, const Vector& frame);

/// Reads frames until EOF; returns nullopt at a clean end of stream.
class FrameReader {
 public:
  explicit FrameReader(std::istream& in) : in_(in) {}
  std::optional<Vector> next();

 private:
  std::istream& in_;
};

std::string format_double(double v);

}  // namespace slr
