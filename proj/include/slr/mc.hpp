#pragma once

#include "slr/linalg.hpp"
#include "slr/matrix_io.hpp"
#include "slr/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace slr {

/// Partially observed matrix: values are zero-filled off the observation set.
struct MaskedMatrix {
  Matrix y;
  BinaryMask omega;
  double p_hat = 0.0;  // observed fraction

  static MaskedMatrix observe(const Matrix& full, const BinaryMask& omega);
};

/// Top-r left singular basis of (1/p_hat) Y with entries larger than
/// 2 mu sqrt(r/n) zeroed before re-orthonormalization, so the initialization
/// inherits the incoherence bound. Throws RankDeficientError when clipping
/// collapses the rank.
BasisMatrix spectral_init_clipped(const MaskedMatrix& y, Index r, double mu);

struct AltMinOptions {
  enum class Mode { kAllSamples, kPartitioned };
  Mode mode = Mode::kAllSamples;
  int sweeps = 0;          // 0 -> ceil(3 * log(||Y||_F / tol_abs)) with floor 10
  double tol = 1e-12;      // relative objective stop on P_Omega residual
  double clip_mu = 3.0;    // incoherence bound used by the initialization
  uint64_t split_seed = 1; // partitioned mode: seed for the disjoint split
};

/// Alternating least squares over the factors of a rank-r completion.
/// All-samples mode reuses the full observation set every half-sweep;
/// partitioned mode splits it into 2T+1 disjoint subsets (one for the
/// initialization, two per sweep). Throws UnderdeterminedRowError when a
/// row or column has fewer than r observations in its system.
Matrix mc_altmin(const MaskedMatrix& y, Index r, const AltMinOptions& opts);

struct GrouseOptions {
  enum class Step { kGreedy, kFixed };
  Step step = Step::kGreedy;
  double eta = 1.0;  // fixed-step scale; rotation angle is eta * ||r|| * ||p||
};

struct GrouseStepInfo {
  bool skipped = false;
  double residual_norm = 0.0;
  double angle = 0.0;
};

/// One rank-one geodesic update of the basis toward an observed vector:
/// least-squares weights on the observed rows, zero-filled residual, and a
/// rotation of the predicted direction toward the residual. Greedy mode uses
/// the exact angle atan(||r|| / ||w||). Steps with fewer than r observations
/// or a singular restricted system are skipped (state unchanged).
BasisMatrix grouse_step(const BasisMatrix& phat, const Vector& y,
                        const IndexSet& omega, const GrouseOptions& opts,
                        GrouseStepInfo* info = nullptr);

struct TrackTrace {
  std::vector<double> eps;  // sum of squared principal-angle sines per step
  BasisMatrix final_basis;
  Index skipped_steps = 0;
};

/// Runs grouse_step over the columns of y (restricted to omega when given)
/// and records the subspace-error trace against the true subspace when one
/// is provided.
TrackTrace track_missing(const Matrix& y, const BinaryMask* omega,
                         const BasisMatrix& phat0, const GrouseOptions& opts,
                         const BasisMatrix* truth = nullptr);

/// Observation count per column demanded by the partial-observation regime:
/// (64/3) r log^2(n) mu log(20 r).
double grouse_required_samples(Index n, Index r, double mu);

}  // namespace slr
