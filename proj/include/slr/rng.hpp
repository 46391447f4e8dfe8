#pragma once

#include <cstdint>

namespace slr {

/// Philox4x32-10 counter-based generator.
///
/// The output sequence is a pure function of (seed, stream, block index), so
/// the same seed reproduces the same draws on every platform and every
/// sub-generator owns a disjoint stream: adding or removing draws in one
/// generator never perturbs another.
class Philox {
 public:
  explicit Philox(uint64_t seed, uint64_t stream = 0);

  uint32_t next_u32();
  uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double next_double();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; pairs are cached.
  double normal();

  /// One keyed block, exposed for known-answer tests.
  static void block(const uint32_t counter[4], const uint32_t key[2],
                    uint32_t out[4]);

 private:
  void refill();

  uint32_t key_[2];
  uint64_t stream_;
  uint64_t block_index_ = 0;
  uint32_t out_[4] = {0, 0, 0, 0};
  int pos_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Named sub-streams used by the synthetic-data generators.
enum class RngStream : uint32_t {
  kSubspace = 1,
  kRotation = 2,
  kCoeffs = 3,
  kSupport = 4,
  kMagnitude = 5,
  kNoise = 6,
  kMask = 7,
  kInit = 8,
  kTrial = 9,
  kGeneric = 10,
};

/// Sub-generator for (purpose, segment); distinct pairs never collide.
Philox make_stream(uint64_t seed, RngStream purpose, uint32_t segment = 0);

}  // namespace slr
