#include "slr/matrix_io.hpp"

#include "slr/rng.hpp"

#include <doctest.h>

#include <sstream>

using namespace slr;

namespace {

Matrix random_matrix(Index rows, Index cols, uint64_t seed) {
  Philox rng(seed, 0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal() * 1e3;
  }
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("slrm round-trips bit-exactly") {
  Matrix m = random_matrix(17, 9, 5);
  std::stringstream buf;
  write_slrm(buf, m);
  Matrix back = read_slrm(buf);
  CHECK(back.rows() == m.rows());
  CHECK(back.cols() == m.cols());
  CHECK(back == m);
}

TEST_CASE("slrm header layout is stable") {
  Matrix m(1, 2);
  m << 1.0, -2.5;
  std::stringstream buf;
  write_slrm(buf, m);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 4 + 4 + 4 + 2 * 8);
  CHECK(bytes.substr(0, 4) == "SLRM");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // rows, little-endian
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);  // cols
}

TEST_CASE("slrm rejects bad magic") {
  std::stringstream buf(std::string("XXXX\0\0\0\0\0\0\0\0", 12));
  CHECK_THROWS_AS(read_slrm(buf), IoError);
}

TEST_CASE("csv round-trips doubles exactly") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Matrix m = random_matrix(6, 4, 100 + seed);
    m(0, 0) = 1.0 / 3.0;
    m(1, 1) = -0.1;
    std::stringstream buf;
    write_csv(buf, m);
    Matrix back = read_csv(buf);
    CHECK(back == m);
  }
}

TEST_CASE("mask round-trips and counts") {
  Philox rng(8, 0);
  BinaryMask mask(13, 7);
  Index expected = 0;
  for (Index j = 0; j < 7; ++j) {
    for (Index i = 0; i < 13; ++i) {
      if (rng.next_double() < 0.4) {
        mask.set(i, j, true);
        ++expected;
      }
    }
  }
  CHECK(mask.count() == expected);
  std::stringstream buf;
  write_mask(buf, mask);
  BinaryMask back = read_mask(buf);
  CHECK(back == mask);
  Index col_sum = 0;
  for (Index j = 0; j < 7; ++j) col_sum += back.count_in_col(j);
  CHECK(col_sum == expected);
}

TEST_CASE("frame stream round-trips") {
  std::stringstream buf;
  Matrix m = random_matrix(5, 3, 77);
  for (Index j = 0; j < 3; ++j) write_frame(buf, m.col(j));
  FrameReader reader(buf);
  for (Index j = 0; j < 3; ++j) {
    auto frame = reader.next();
    REQUIRE(frame.has_value());
    CHECK(*frame == m.col(j));
  }
  CHECK_FALSE(reader.next().has_value());
}

TEST_SUITE_END();
