#include "slr/rng.hpp"

#include <cmath>

namespace slr {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void single_round(uint32_t ctr[4], const uint32_t key[2]) {
  const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
  const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
  const uint32_t lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
  const uint32_t lo1 = static_cast<uint32_t>(p1);
  const uint32_t c0 = hi1 ^ ctr[1] ^ key[0];
  const uint32_t c2 = hi0 ^ ctr[3] ^ key[1];
  ctr[0] = c0;
  ctr[1] = lo1;
  ctr[2] = c2;
  ctr[3] = lo0;
}

}  // namespace

void Philox::block(const uint32_t counter[4], const uint32_t key[2],
                   uint32_t out[4]) {
  uint32_t ctr[4] = {counter[0], counter[1], counter[2], counter[3]};
  uint32_t k[2] = {key[0], key[1]};
  for (int round = 0;;) {
    single_round(ctr, k);
    if (++round == 10) break;
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  out[0] = ctr[0];
  out[1] = ctr[1];
  out[2] = ctr[2];
  out[3] = ctr[3];
}

Philox::Philox(uint64_t seed, uint64_t stream) : stream_(stream) {
  key_[0] = static_cast<uint32_t>(seed);
  key_[1] = static_cast<uint32_t>(seed >> 32);
}

void Philox::refill() {
  const uint32_t ctr[4] = {
      static_cast<uint32_t>(block_index_),
      static_cast<uint32_t>(block_index_ >> 32),
      static_cast<uint32_t>(stream_),
      static_cast<uint32_t>(stream_ >> 32),
  };
  block(ctr, key_, out_);
  ++block_index_;
  pos_ = 0;
}

uint32_t Philox::next_u32() {
  if (pos_ == 4) refill();
  return out_[pos_++];
}

uint64_t Philox::next_u64() {
  const uint64_t lo = next_u32();
  const uint64_t hi = next_u32();
  return lo | (hi << 32);
}

double Philox::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Philox::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double Philox::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // 1 - u keeps the argument of log strictly positive.
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Philox make_stream(uint64_t seed, RngStream purpose, uint32_t segment) {
  const uint64_t stream =
      (static_cast<uint64_t>(static_cast<uint32_t>(purpose)) << 32) | segment;
  return Philox(seed, stream);
}

}  // namespace slr
