#pragma once

#include "slr/linalg.hpp"
#include "slr/matrix_io.hpp"
#include "slr/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slr {

struct CoeffModel {
  enum class Type { kGaussianOverT, kBoundedUniform };
  Type type = Type::kBoundedUniform;
  double f = 1.0;  // condition number target for the bounded model
};

struct MagnitudeLaw {
  enum class Type { kUniformRange, kUniformSymmetric };
  Type type = Type::kUniformRange;
  double xmin = 10.0;  // uniform on [xmin, xmax]
  double xmax = 20.0;
  double a = 0.0;  // uniform on [-a, a]
};

struct OutlierSegment {
  enum class Type { kNone, kBernoulli, kMovingObject };
  Type type = Type::kBernoulli;
  Index t_end = 0;  // segment covers frames (previous t_end, t_end], 1-based
  double rho = 0.0;
  Index s = 0;
  Index tau = 0;
  double c0 = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Index n = 0;
  Index tmax = 0;
  Index r = 0;
  Index t_train = 0;
  std::vector<Index> change_times;  // ascending, each in (1, tmax)
  std::vector<double> deltas;       // one per change
  CoeffModel coeffs;
  MagnitudeLaw magnitude;
  std::vector<OutlierSegment> outlier_segments;
  double noise_var = 0.0;
  double observe_p = 1.0;  // observation probability; 1 = fully observed
  uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static ScenarioConfig from_json(const std::string& text);
};

/// Per-column outlier supports with the row/column occupancy fractions the
/// trackers' guarantees are stated against.
struct OutlierSupport {
  Index n = 0;
  Index tmax = 0;
  BinaryMask mask;
  std::vector<IndexSet> columns;

  static OutlierSupport from_mask(BinaryMask m);

  /// max_t |T_t| / n.
  double outfrac_col() const;

  /// Max per-row occupancy fraction over any window of `alpha` consecutive
  /// columns (the window is clamped to tmax when alpha exceeds it).
  double outfrac_row(Index alpha) const;
};

struct GroundTruth {
  Matrix m;      // observed data, l + s (+ noise)
  Matrix l;      // low-rank part
  Matrix s;      // sparse outliers
  Matrix noise;  // empty when noise_var == 0
  Matrix coeffs; // r x tmax subspace coefficients
  std::vector<BasisMatrix> subspaces;  // one per segment, j = 0..J
  std::vector<Index> change_times;     // 1-based first frame of each new segment
  OutlierSupport support;
  BinaryMask observed;  // empty when fully observed
  ScenarioConfig config;

  Index segment_of(Index t) const;  // t is 1-based
  const BasisMatrix& subspace_at(Index t) const;
};

std::pair<Matrix, BasisMatrix> gen_fixed_lowrank(Index n, Index tmax, Index r,
                                                 uint64_t seed);

std::vector<BasisMatrix> gen_piecewise_subspaces(
    Index n, Index r, Index num_changes, const std::vector<double>& deltas,
    uint64_t seed);

/// Row i of the result is iid uniform on [-q_i, q_i] with
/// q_i = sqrt(f) - sqrt(f)(i-1)/(2r) for i < r and q_r = 1, so the
/// coefficient covariance has condition number f.
Matrix gen_bounded_coeffs(Index r, Index tmax, double f, uint64_t seed);

OutlierSupport gen_bernoulli_support(Index n, Index tmax, double rho,
                                     uint64_t seed);

/// Deterministic block support of width s pacing down then up across the
/// first s/c0 rows with period 2*tau. Requires 1/c0 integral, s/c0 <= n and
/// tau >= ceil(c0 * tau).
OutlierSupport gen_moving_object_support(Index n, Index tmax, Index s,
                                         Index tau, double c0);

Matrix gen_outliers(const OutlierSupport& support, const MagnitudeLaw& law,
                    uint64_t seed);

BinaryMask gen_missing_mask(Index n, Index tmax, double p, uint64_t seed);

GroundTruth assemble_scenario(const ScenarioConfig& config);

/// Maps the row-occupancy knob b0 to the nearest block count:
/// c0 = 1 / round(1 / b0).
double moving_object_c0_from_b0(double b0);

}  // namespace slr
