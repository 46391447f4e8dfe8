#include "slr/mc.hpp"

#include "slr/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace slr {

namespace {

// Least squares of one factor against the observed entries of one line
// (row or column) of Y via the r x r normal equations. Returns nullopt when
// the sampled factor rows are numerically singular; the caller keeps the
// previous estimate for that line.
std::optional<Vector> solve_line(const Matrix& factor,
                                 const std::vector<Index>& obs,
                                 const Vector& values) {
  const Index r = factor.cols();
  Matrix g = Matrix::Zero(r, r);
  Vector rhs = Vector::Zero(r);
  for (size_t k = 0; k < obs.size(); ++k) {
    const auto row = factor.row(obs[k]);
    g.noalias() += row.transpose() * row;
    rhs.noalias() += row.transpose() * values(static_cast<Index>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double scale = factor.squaredNorm() /
                       std::max<double>(factor.rows(), 1);
  if (!(lambda_min > 1e-12 * std::max(lambda_max, scale))) return std::nullopt;
  return Vector(g.ldlt().solve(rhs));
}

void require_determined(const BinaryMask& omega, Index r) {
  for (Index j = 0; j < omega.cols(); ++j) {
    const Index count = omega.count_in_col(j);
    if (count < r) {
      throw UnderdeterminedRowError(
          "column " + std::to_string(j) + " has " + std::to_string(count) +
              " observations, needs " + std::to_string(r),
          j, false);
    }
  }
  for (Index i = 0; i < omega.rows(); ++i) {
    const Index count = omega.count_in_row(i);
    if (count < r) {
      throw UnderdeterminedRowError(
          "row " + std::to_string(i) + " has " + std::to_string(count) +
              " observations, needs " + std::to_string(r),
          i, true);
    }
  }
}

std::vector<std::vector<Index>> mask_columns(const BinaryMask& m) {
  std::vector<std::vector<Index>> cols(static_cast<size_t>(m.cols()));
  for (Index j = 0; j < m.cols(); ++j) cols[static_cast<size_t>(j)] =
      m.col_indices(j);
  return cols;
}

std::vector<std::vector<Index>> mask_rows(const BinaryMask& m) {
  std::vector<std::vector<Index>> rows(static_cast<size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (m.get(i, j)) rows[static_cast<size_t>(i)].push_back(j);
    }
  }
  return rows;
}

double masked_residual(const Matrix& y, const BinaryMask& omega,
                       const Matrix& u, const Matrix& v) {
  double acc = 0.0;
  for (Index j = 0; j < y.cols(); ++j) {
    for (Index i = 0; i < y.rows(); ++i) {
      if (!omega.get(i, j)) continue;
      const double diff = y(i, j) - u.row(i).dot(v.row(j));
      acc += diff * diff;
    }
  }
  return std::sqrt(acc);
}

}  // namespace

MaskedMatrix MaskedMatrix::observe(const Matrix& full,
                                   const BinaryMask& omega) {
  if (full.rows() != omega.rows() || full.cols() != omega.cols()) {
    throw DimensionError("MaskedMatrix: mask shape mismatch");
  }
  MaskedMatrix out;
  out.y = Matrix::Zero(full.rows(), full.cols());
  for (Index j = 0; j < full.cols(); ++j) {
    for (Index i = 0; i < full.rows(); ++i) {
      if (omega.get(i, j)) out.y(i, j) = full(i, j);
    }
  }
  out.omega = omega;
  out.p_hat = static_cast<double>(omega.count()) /
              static_cast<double>(full.rows() * full.cols());
  return out;
}

BasisMatrix spectral_init_clipped(const MaskedMatrix& y, Index r, double mu) {
  if (y.p_hat <= 0.0) {
    throw PreconditionError("spectral_init_clipped: nothing observed");
  }
  const Index n = y.y.rows();
  SvdTriple f = topr_svd(y.y / y.p_hat, r);
  Matrix u = f.u.matrix();
  const double bound =
      2.0 * mu * std::sqrt(static_cast<double>(r) / static_cast<double>(n));
  for (Index j = 0; j < u.cols(); ++j) {
    for (Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > bound) u(i, j) = 0.0;
    }
  }
  try {
    return orthonormalize(u);
  } catch (const RankDeficientError&) {
    throw RankDeficientError(
        "spectral_init_clipped: clipping collapsed the basis rank");
  }
}

Matrix mc_altmin(const MaskedMatrix& y, Index r, const AltMinOptions& opts) {
  const Index n = y.y.rows();
  const Index d = y.y.cols();
  if (r < 1 || r > std::min(n, d)) {
    throw DimensionError("mc_altmin: rank out of range");
  }

  int sweeps = opts.sweeps;
  if (sweeps <= 0) {
    sweeps = std::max(
        10, static_cast<int>(std::ceil(3.0 * std::log(std::max(
                2.0, y.y.norm() / std::max(opts.tol, 1e-300))))));
  }

  // Per-sweep observation sets. All-samples mode reuses Omega everywhere;
  // partitioned mode assigns each observed entry to one of 2T+1 disjoint
  // subsets: half of them to subset 0 (the spectral initialization needs the
  // density), the rest spread evenly over the 2T sweep subsets.
  std::vector<BinaryMask> subsets;
  if (opts.mode == AltMinOptions::Mode::kPartitioned) {
    const int parts = 2 * sweeps + 1;
    subsets.assign(static_cast<size_t>(parts), BinaryMask(n, d));
    Philox rng(opts.split_seed,
               static_cast<uint64_t>(RngStream::kMask) << 32 | 1u);
    // Stratified deal per column: half of each column's observations feed
    // the spectral initialization (subset 0), the rest go round-robin over
    // the 2T sweep subsets, so no subset starves a whole line.
    for (Index j = 0; j < d; ++j) {
      IndexSet obs = y.omega.col_indices(j);
      for (size_t k = obs.size(); k > 1; --k) {
        const size_t swap = static_cast<size_t>(rng.next_double() * k);
        std::swap(obs[k - 1], obs[swap]);
      }
      const size_t init_share = (obs.size() + 1) / 2;
      const size_t offset = static_cast<size_t>(rng.next_double() * (parts - 1));
      for (size_t k = 0; k < obs.size(); ++k) {
        const size_t pick =
            k < init_share ? 0 : 1 + (offset + k - init_share) % (parts - 1);
        subsets[pick].set(obs[k], j, true);
      }
    }
  }

  // The full system must be determined; per-subset deficits in partitioned
  // mode are tolerated by skipping that line's update for the sweep.
  require_determined(y.omega, r);

  const bool partitioned = opts.mode == AltMinOptions::Mode::kPartitioned;
  MaskedMatrix init_input = y;
  if (partitioned) init_input = MaskedMatrix::observe(y.y, subsets[0]);
  Matrix u = spectral_init_clipped(init_input, r, opts.clip_mu).matrix();
  Matrix v = Matrix::Zero(d, r);
  std::vector<bool> v_ready(static_cast<size_t>(d), false);

  const double y_norm = std::max(y.y.norm(), 1e-300);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const BinaryMask& omega_v =
        partitioned ? subsets[static_cast<size_t>(2 * sweep + 1)] : y.omega;
    const BinaryMask& omega_u =
        partitioned ? subsets[static_cast<size_t>(2 * sweep + 2)] : y.omega;

    const auto cols = mask_columns(omega_v);
    for (Index j = 0; j < d; ++j) {
      const auto* obs = &cols[static_cast<size_t>(j)];
      IndexSet fallback;
      if (static_cast<Index>(obs->size()) < r) {
        if (!partitioned) {
          throw UnderdeterminedRowError(
              "column " + std::to_string(j) + " has " +
                  std::to_string(obs->size()) + " observations, needs " +
                  std::to_string(r),
              j, false);
        }
        if (v_ready[static_cast<size_t>(j)]) continue;  // keep last estimate
        fallback = y.omega.col_indices(j);  // bootstrap from the full set
        obs = &fallback;
      }
      Vector vals(static_cast<Index>(obs->size()));
      for (size_t k = 0; k < obs->size(); ++k) {
        vals(static_cast<Index>(k)) = y.y((*obs)[k], j);
      }
      if (auto sol = solve_line(u, *obs, vals)) {
        v.row(j) = sol->transpose();
        v_ready[static_cast<size_t>(j)] = true;
      }
    }

    const auto rows = mask_rows(omega_u);
    for (Index i = 0; i < n; ++i) {
      const auto* obs = &rows[static_cast<size_t>(i)];
      if (static_cast<Index>(obs->size()) < r) {
        if (!partitioned) {
          throw UnderdeterminedRowError(
              "row " + std::to_string(i) + " has " +
                  std::to_string(obs->size()) + " observations, needs " +
                  std::to_string(r),
              i, true);
        }
        continue;  // keep the previous row estimate this sweep
      }
      Vector vals(static_cast<Index>(obs->size()));
      for (size_t k = 0; k < obs->size(); ++k) {
        vals(static_cast<Index>(k)) = y.y(i, (*obs)[k]);
      }
      if (auto sol = solve_line(v, *obs, vals)) u.row(i) = sol->transpose();
    }

    if (masked_residual(y.y, y.omega, u, v) <= opts.tol * y_norm) break;
  }
  return u * v.transpose();
}

BasisMatrix grouse_step(const BasisMatrix& phat, const Vector& y,
                        const IndexSet& omega, const GrouseOptions& opts,
                        GrouseStepInfo* info) {
  const Index n = phat.ambient_dim();
  const Index r = phat.dim();
  if (y.size() != n) throw DimensionError("grouse_step: frame size mismatch");
  GrouseStepInfo local;
  auto skip = [&]() {
    local.skipped = true;
    if (info) *info = local;
    return phat;
  };

  if (static_cast<Index>(omega.size()) < r) return skip();

  Matrix sub(static_cast<Index>(omega.size()), r);
  Vector y_obs(static_cast<Index>(omega.size()));
  for (size_t k = 0; k < omega.size(); ++k) {
    sub.row(static_cast<Index>(k)) = phat.matrix().row(omega[k]);
    y_obs(static_cast<Index>(k)) = y(omega[k]);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  qr.setThreshold(1e-12);
  if (qr.rank() < r) return skip();
  const Vector w = qr.solve(y_obs);

  Vector residual = Vector::Zero(n);
  const Vector fitted = sub * w;
  for (size_t k = 0; k < omega.size(); ++k) {
    residual(omega[k]) = y_obs(static_cast<Index>(k)) -
                         fitted(static_cast<Index>(k));
  }
  const double r_norm = residual.norm();
  const Vector predicted = phat.matrix() * w;
  const double p_norm = predicted.norm();
  local.residual_norm = r_norm;
  if (r_norm <= 1e-14 * std::max(1.0, y.norm()) || p_norm == 0.0) {
    if (info) *info = local;
    return phat;  // already explained; zero gradient
  }

  const double angle = opts.step == GrouseOptions::Step::kGreedy
                           ? std::atan2(r_norm, p_norm)
                           : opts.eta * r_norm * p_norm;
  local.angle = angle;

  Matrix updated = phat.matrix();
  const Vector direction = (std::cos(angle) - 1.0) * predicted / p_norm +
                           std::sin(angle) * residual / r_norm;
  updated.noalias() += direction * (w / w.norm()).transpose();
  if (info) *info = local;
  return orthonormalize(updated);
}

TrackTrace track_missing(const Matrix& y, const BinaryMask* omega,
                         const BasisMatrix& phat0, const GrouseOptions& opts,
                         const BasisMatrix* truth) {
  TrackTrace trace;
  BasisMatrix basis = phat0;
  IndexSet all(static_cast<size_t>(y.rows()));
  for (Index i = 0; i < y.rows(); ++i) all[static_cast<size_t>(i)] = i;

  for (Index t = 0; t < y.cols(); ++t) {
    const IndexSet obs = omega ? omega->col_indices(t) : all;
    GrouseStepInfo info;
    basis = grouse_step(basis, y.col(t), obs, opts, &info);
    if (info.skipped) ++trace.skipped_steps;
    if (truth) {
      trace.eps.push_back(principal_angle_stats(basis, *truth).eps);
    }
  }
  trace.final_basis = std::move(basis);
  return trace;
}

double grouse_required_samples(Index n, Index r, double mu) {
  const double logn = std::log(static_cast<double>(n));
  return (64.0 / 3.0) * static_cast<double>(r) * logn * logn * mu *
         std::log(20.0 * static_cast<double>(r));
}

}  // namespace slr
