#pragma once

#include "slr/linalg.hpp"
#include "slr/types.hpp"

#include <optional>
#include <vector>

namespace slr {

struct NorstParams {
  Index r = 0;
  double eps = 1e-3;        // target subspace accuracy
  Index k_updates = 0;      // K; 0 -> ceil(log(1/eps))
  Index alpha = 0;          // frames per update window; 0 -> max(r ln n, 60)
  double xmin = 0.0;        // smallest outlier magnitude the data guarantees
  double omega_supp = 0.0;  // support threshold; 0 -> xmin / 2
  double xi = 0.0;          // l1 noise bound; 0 -> xmin / 15
  bool adaptive_xi = false; // xi_t = ||Psi lhat_{t-1}||, for video-style data
  double omega_evals = 0.0; // detection threshold; 0 -> 2 eps^2 lambda_plus
  Index t_train = 0;
  double cs_tol = 1e-5;
  int cs_max_iters = 400;
  double ls_cond_limit = 1e12;
  bool record_bases = true;  // keep a basis snapshot per update checkpoint

  Index resolved_k() const;
  Index resolved_alpha(Index n) const;
  double resolved_omega_supp() const;
  double resolved_xi() const;
  double resolved_omega_evals(double lambda_plus) const;
  void validate() const;
};

struct NorstInit {
  BasisMatrix p0;
  double lambda_plus = 0.0;  // sigma_1(Lhat)^2 / t_train
  Matrix lhat_train;         // low-rank estimate over the training frames
};

/// Batch initialization: a few alternating-projection passes over the first
/// training frames followed by a rank-r SVD of the recovered low-rank part.
NorstInit norst_init(const Matrix& y_train, Index r);

struct FrameOutput {
  Vector xhat;
  Vector lhat;
  IndexSet support;
  double xi_used = 0.0;
  double projected_residual = 0.0;  // ||Psi(m - xhat)||
  bool cs_converged = true;
  bool ls_fallback = false;
};

enum class NorstPhase { kUpdate, kDetect };

struct NorstCheckpoint {
  Index t;        // absolute frame index of the update
  Index segment;  // tracker segment counter (0 = initial subspace)
  Index k;        // update number within the segment, 1-based
};

struct NorstSegment {
  Index detected_at = 0;  // absolute t; equals t_train for segment 0
  Index updates_done = 0;
  BasisMatrix final_basis;
};

/// Online tracker: per frame, sparse recovery against the projection
/// orthogonal to the current subspace estimate, then least squares on the
/// detected support; every alpha frames either a rank-r SVD subspace update
/// (update phase) or a change-detection test (detect phase).
///
/// Frames must be fed in order by one thread at a time; independent trackers
/// may run concurrently. Working memory is one n x alpha buffer plus the
/// current basis; checkpoint basis snapshots are optional extras.
class NorstTracker {
 public:
  NorstTracker(BasisMatrix p0, double lambda_plus, NorstParams params,
               Index n);

  FrameOutput feed(const Vector& m_t);

  /// Rank-r SVD of the buffered frames replaces the basis estimate.
  /// Requires a full buffer and update phase.
  void subspace_update();

  /// Change test on the buffered frames: largest singular value of the
  /// projected buffer against sqrt(omega_evals * alpha). Requires a full
  /// buffer and detect phase. Returns true and enters update phase on
  /// detection.
  bool detect();

  const BasisMatrix& current_basis() const { return basis_; }
  NorstPhase phase() const { return phase_; }
  Index t() const { return t_; }
  Index update_count() const { return k_; }
  Index segment_index() const { return segment_; }
  Index buffer_fill() const { return buffer_fill_; }
  double lambda_plus() const { return lambda_plus_; }
  const NorstParams& params() const { return params_; }
  Index alpha() const { return alpha_; }
  Index k_updates() const { return k_updates_; }

  /// Detected change times, excluding the initial segment.
  std::vector<Index> detected_changes() const;
  const std::vector<NorstSegment>& segments() const { return segments_; }
  const std::vector<NorstCheckpoint>& checkpoints() const {
    return checkpoints_;
  }
  const std::vector<BasisMatrix>& checkpoint_bases() const {
    return checkpoint_bases_;
  }

 private:
  double detection_statistic() const;

  NorstParams params_;
  Index n_;
  Index alpha_;
  Index k_updates_;
  double omega_supp_;
  double xi_;
  double omega_evals_;
  double lambda_plus_;

  BasisMatrix basis_;
  NorstPhase phase_ = NorstPhase::kUpdate;
  Index t_;
  Index k_ = 1;
  Index segment_ = 0;
  Matrix buffer_;
  Index buffer_fill_ = 0;
  Vector last_lhat_;
  bool has_last_lhat_ = false;

  std::vector<NorstSegment> segments_;
  std::vector<NorstCheckpoint> checkpoints_;
  std::vector<BasisMatrix> checkpoint_bases_;
};

struct OfflineOutput {
  Matrix lhat;  // one column per fed frame
  Matrix xhat;
  std::vector<Index> chosen_segment;  // which final basis served each frame
};

/// Smoothing pass: every frame is re-solved with the final basis of its
/// segment; frames near a detected change (within K*alpha after, or within
/// 2*alpha before the next detection) try the neighbouring segment's final
/// basis too and keep whichever leaves the smaller projected residual.
OfflineOutput norst_offline(const Matrix& frames, Index first_t,
                            const NorstTracker& tracker);

}  // namespace slr
