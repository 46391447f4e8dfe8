#include "slr/norst.hpp"

#include "slr/batch.hpp"
#include "slr/sparse.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace slr {

Index NorstParams::resolved_k() const {
  if (k_updates > 0) return k_updates;
  return static_cast<Index>(std::ceil(std::log(1.0 / eps)));
}

Index NorstParams::resolved_alpha(Index n) const {
  if (alpha > 0) return alpha;
  const double by_rank =
      static_cast<double>(r) * std::log(static_cast<double>(n));
  return static_cast<Index>(std::ceil(std::max(by_rank, 60.0)));
}

double NorstParams::resolved_omega_supp() const {
  return omega_supp > 0.0 ? omega_supp : xmin / 2.0;
}

double NorstParams::resolved_xi() const {
  return xi > 0.0 ? xi : xmin / 15.0;
}

double NorstParams::resolved_omega_evals(double lambda_plus) const {
  return omega_evals > 0.0 ? omega_evals : 2.0 * eps * eps * lambda_plus;
}

void NorstParams::validate() const {
  if (r < 1) throw InvalidConfigError("norst: r must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InvalidConfigError("norst: eps must lie in (0, 1)");
  }
  if (resolved_k() < 1) throw InvalidConfigError("norst: K must be >= 1");
  if (!adaptive_xi && xmin <= 0.0 && (omega_supp <= 0.0 || xi <= 0.0)) {
    throw InvalidConfigError(
        "norst: xmin (or explicit omega_supp and xi) required");
  }
  if (xmin <= 0.0 && omega_supp <= 0.0) {
    throw InvalidConfigError("norst: omega_supp unresolved without xmin");
  }
}

NorstInit norst_init(const Matrix& y_train, Index r) {
  const Index t_train = y_train.cols();
  if (t_train < r) {
    throw PreconditionError("norst_init: need at least r training frames");
  }
  AltProjConfig cfg;
  cfg.rank = r;
  cfg.eps = 0.01;
  cfg.t_per_stage = static_cast<int>(
      std::ceil(10.0 * std::log(std::max(2.0, static_cast<double>(r)))));
  SLRDecomposition dec = altproj(y_train, cfg);
  SvdTriple f = topr_svd(dec.lhat, r);
  NorstInit init;
  init.p0 = f.u;
  init.lambda_plus =
      f.sigma(0) * f.sigma(0) / static_cast<double>(t_train);
  init.lhat_train = std::move(dec.lhat);
  return init;
}

NorstTracker::NorstTracker(BasisMatrix p0, double lambda_plus,
                           NorstParams params, Index n)
    : params_(params), n_(n), lambda_plus_(lambda_plus),
      basis_(std::move(p0)) {
  params_.validate();
  if (basis_.ambient_dim() != n) {
    throw DimensionError("norst: initial basis ambient dim mismatch");
  }
  alpha_ = params_.resolved_alpha(n);
  if (alpha_ < params_.r) {
    throw InvalidConfigError("norst: alpha must be >= r");
  }
  k_updates_ = params_.resolved_k();
  omega_supp_ = params_.resolved_omega_supp();
  xi_ = params_.adaptive_xi ? 0.0 : params_.resolved_xi();
  omega_evals_ = params_.resolved_omega_evals(lambda_plus_);
  t_ = params_.t_train;
  buffer_.resize(n, alpha_);

  // The initial subspace estimate is treated like a change detected at
  // t_train: K refinement updates run before the tracker starts watching
  // for real changes.
  segments_.push_back(NorstSegment{t_, 0, basis_});
}

FrameOutput NorstTracker::feed(const Vector& m_t) {
  if (m_t.size() != n_) throw DimensionError("norst: frame size mismatch");
  ++t_;

  FrameOutput out;
  const ProjectorOp psi(basis_);
  Vector y_tilde = psi.apply(m_t);

  double xi_t = xi_;
  if (params_.adaptive_xi) {
    // Previous frame's projected residual, floored relative to the current
    // observation: an unbounded-noise mode with a residual near zero would
    // otherwise turn the l1 step into an equality-constrained solve.
    const double floor = 1e-3 * y_tilde.norm();
    xi_t = has_last_lhat_
               ? std::max(psi.apply(last_lhat_).norm(), floor)
               : y_tilde.norm() / 2.0;
  }
  out.xi_used = xi_t;

  Vector x_cs;
  if (y_tilde.norm() <= xi_t) {
    x_cs = Vector::Zero(n_);
    out.cs_converged = true;
  } else {
    BpdnResult cs = l1_bpdn_solve(psi, y_tilde, xi_t, params_.cs_tol,
                                  params_.cs_max_iters);
    x_cs = std::move(cs.x);
    out.cs_converged = cs.converged;
  }

  out.support = support_threshold(x_cs, omega_supp_);
  try {
    out.xhat = ls_on_support(basis_, y_tilde, out.support,
                             params_.ls_cond_limit);
  } catch (const IllConditionedSupportError&) {
    out.ls_fallback = true;
    out.xhat = Vector::Zero(n_);
    for (Index i : out.support) out.xhat(i) = x_cs(i);
  }
  out.lhat = m_t - out.xhat;
  out.projected_residual = psi.apply(out.lhat).norm();

  last_lhat_ = out.lhat;
  has_last_lhat_ = true;

  buffer_.col(buffer_fill_++) = out.lhat;
  if (buffer_fill_ == alpha_) {
    if (phase_ == NorstPhase::kUpdate) {
      subspace_update();
    } else {
      detect();
    }
  }
  return out;
}

void NorstTracker::subspace_update() {
  if (phase_ != NorstPhase::kUpdate) {
    throw PreconditionError("subspace_update: tracker not in update phase");
  }
  if (buffer_fill_ < alpha_) {
    throw PreconditionError("subspace_update: buffer not full");
  }
  basis_ = topr_svd(buffer_, params_.r).u;
  buffer_fill_ = 0;

  checkpoints_.push_back(NorstCheckpoint{t_, segment_, k_});
  if (params_.record_bases) checkpoint_bases_.push_back(basis_);
  segments_.back().updates_done = k_;
  segments_.back().final_basis = basis_;

  if (++k_ > k_updates_) {
    phase_ = NorstPhase::kDetect;
    k_ = 1;
  }
}

double NorstTracker::detection_statistic() const {
  // sigma_1 of (I - PP') * buffer via the alpha x alpha Gram matrix; the
  // projector is idempotent so B'B - (P'B)'(P'B) is exactly the Gram of the
  // projected buffer.
  const Matrix pb = basis_.matrix().transpose() * buffer_;
  Matrix gram = buffer_.transpose() * buffer_ - pb.transpose() * pb;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

bool NorstTracker::detect() {
  if (phase_ != NorstPhase::kDetect) {
    throw PreconditionError("detect: tracker not in detect phase");
  }
  if (buffer_fill_ < alpha_) {
    throw PreconditionError("detect: buffer not full");
  }
  const double stat = detection_statistic();
  buffer_fill_ = 0;
  if (stat * stat <= omega_evals_ * static_cast<double>(alpha_)) {
    return false;
  }
  ++segment_;
  k_ = 1;
  phase_ = NorstPhase::kUpdate;
  segments_.push_back(NorstSegment{t_, 0, basis_});
  return true;
}

std::vector<Index> NorstTracker::detected_changes() const {
  std::vector<Index> out;
  for (size_t j = 1; j < segments_.size(); ++j) {
    out.push_back(segments_[j].detected_at);
  }
  return out;
}

namespace {

struct FrameSolve {
  Vector xhat;
  double projected_residual;
};

FrameSolve solve_frame(const BasisMatrix& basis, const Vector& m_t,
                       const NorstParams& params, double omega_supp,
                       double xi) {
  const ProjectorOp psi(basis);
  Vector y_tilde = psi.apply(m_t);
  FrameSolve out;
  if (y_tilde.norm() <= xi) {
    out.xhat = Vector::Zero(m_t.size());
    out.projected_residual = y_tilde.norm();
    return out;
  }
  BpdnResult cs =
      l1_bpdn_solve(psi, y_tilde, xi, params.cs_tol, params.cs_max_iters);
  IndexSet support = support_threshold(cs.x, omega_supp);
  try {
    out.xhat = ls_on_support(basis, y_tilde, support, params.ls_cond_limit);
  } catch (const IllConditionedSupportError&) {
    out.xhat = Vector::Zero(m_t.size());
    for (Index i : support) out.xhat(i) = cs.x(i);
  }
  out.projected_residual = psi.apply(m_t - out.xhat).norm();
  return out;
}

}  // namespace

OfflineOutput norst_offline(const Matrix& frames, Index first_t,
                            const NorstTracker& tracker) {
  const auto& segments = tracker.segments();
  if (segments.empty()) {
    throw PreconditionError("norst_offline: tracker has no segments");
  }
  const Index alpha = tracker.alpha();
  const Index k_total = tracker.k_updates();
  const NorstParams& params = tracker.params();
  if (params.adaptive_xi) {
    throw InvalidConfigError(
        "norst_offline: adaptive xi is an online-only option");
  }
  const double omega_supp = params.resolved_omega_supp();
  const double xi = params.resolved_xi();

  OfflineOutput out;
  out.lhat.resize(frames.rows(), frames.cols());
  out.xhat.resize(frames.rows(), frames.cols());
  out.chosen_segment.resize(static_cast<size_t>(frames.cols()));

  const Index num_segments = static_cast<Index>(segments.size());
  for (Index c = 0; c < frames.cols(); ++c) {
    const Index t = first_t + c;
    Index seg = 0;
    for (Index j = 0; j < num_segments; ++j) {
      if (t > segments[static_cast<size_t>(j)].detected_at) seg = j;
    }

    std::vector<Index> candidates{seg};
    const Index seg_detect = segments[static_cast<size_t>(seg)].detected_at;
    if (seg > 0 && t <= seg_detect + k_total * alpha) {
      candidates.push_back(seg - 1);
    }
    if (seg + 1 < num_segments &&
        t > segments[static_cast<size_t>(seg + 1)].detected_at - 2 * alpha) {
      candidates.push_back(seg + 1);
    }

    double best = -1.0;
    for (Index cand : candidates) {
      const auto& basis = segments[static_cast<size_t>(cand)].final_basis;
      FrameSolve solve =
          solve_frame(basis, frames.col(c), params, omega_supp, xi);
      if (best < 0.0 || solve.projected_residual < best) {
        best = solve.projected_residual;
        out.xhat.col(c) = solve.xhat;
        out.chosen_segment[static_cast<size_t>(c)] = cand;
      }
    }
    out.lhat.col(c) = frames.col(c) - out.xhat.col(c);
  }
  return out;
}

}  // namespace slr
