#include "slr/sparse.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace slr {

namespace {

double power_iteration_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Vector v = Vector::Ones(a.cols()).normalized();
  double estimate = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vector w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    estimate = norm;
  }
  return std::sqrt(estimate);
}

inline void soft_threshold_inplace(Vector& v, double tau) {
  for (Index i = 0; i < v.size(); ++i) {
    const double a = v(i);
    v(i) = a > tau ? a - tau : (a < -tau ? a + tau : 0.0);
  }
}

// Projection onto the l2 ball of radius xi centered at y.
inline Vector project_ball(const Vector& v, const Vector& y, double xi) {
  Vector diff = v - y;
  const double norm = diff.norm();
  if (norm <= xi) return v;
  return y + diff * (xi / norm);
}

}  // namespace

DenseOp::DenseOp(Matrix a) : a_(std::move(a)) {
  norm_bound_ = power_iteration_norm(a_) * 1.02 + 1e-12;
}

BpdnResult l1_bpdn_solve(const LinearOp& a, const Vector& y, double xi,
                         double tol, int max_iters) {
  if (xi < 0.0) throw InvalidConfigError("l1_bpdn: xi must be >= 0");
  if (y.size() != a.rows()) throw DimensionError("l1_bpdn: y size mismatch");

  BpdnResult result;
  result.x = Vector::Zero(a.cols());
  const double y_norm = y.norm();
  if (y_norm <= xi) {
    // Zero is feasible and no other point has smaller l1 norm.
    result.converged = true;
    result.residual_norm = y_norm;
    return result;
  }

  // Work on y/scale so the penalty and tolerances are scale-free.
  const double scale = std::max(y_norm, 1e-300);
  const Vector ys = y / scale;
  const double xis = xi / scale;

  const double mu = std::max(1e-12, a.norm_bound() * a.norm_bound());
  double rho = 1.0;

  Vector x = Vector::Zero(a.cols());
  Vector ax = Vector::Zero(a.rows());
  Vector z = project_ball(Vector::Zero(a.rows()), ys, xis);
  Vector u = Vector::Zero(a.rows());

  int it = 0;
  for (; it < max_iters; ++it) {
    Vector grad = a.apply_adjoint(ax - z + u);
    Vector v = x - grad / mu;
    soft_threshold_inplace(v, 1.0 / (rho * mu));
    x = std::move(v);
    ax = a.apply(x);

    Vector z_prev = std::move(z);
    z = project_ball(ax + u, ys, xis);
    u += ax - z;

    const double primal = (ax - z).norm();
    const double dual = rho * a.apply_adjoint(z - z_prev).norm();
    if (primal <= tol && dual <= tol) {
      result.converged = true;
      ++it;
      break;
    }
    if ((it + 1) % 10 == 0) {
      if (primal > 10.0 * dual && rho < 1e8) {
        rho *= 2.0;
        u *= 0.5;
      } else if (dual > 10.0 * primal && rho > 1e-8) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }

  result.x = x * scale;
  result.iterations = it;
  result.residual_norm = (y - a.apply(result.x)).norm();
  return result;
}

Vector l1_bpdn(const L1Problem& problem) {
  BpdnResult r = l1_bpdn_solve(problem.a, problem.y, problem.xi, problem.tol,
                               problem.max_iters);
  if (!r.converged) {
    throw BpdnIterationLimit(r.iterations, r.residual_norm, std::move(r.x));
  }
  return r.x;
}

Matrix hard_threshold(const Matrix& m, double beta) {
  if (beta < 0.0) throw InvalidConfigError("hard_threshold: beta must be >= 0");
  Matrix out = m;
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      if (!(std::abs(out(i, j)) > beta)) out(i, j) = 0.0;
    }
  }
  return out;
}

IndexSet support_threshold(const Vector& x, double omega) {
  if (omega < 0.0) {
    throw InvalidConfigError("support_threshold: omega must be >= 0");
  }
  IndexSet support;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > omega) support.push_back(i);
  }
  return support;
}

Vector ls_on_support(const BasisMatrix& phat, const Vector& y_tilde,
                     const IndexSet& support, double cond_limit) {
  const Index n = phat.ambient_dim();
  if (y_tilde.size() != n) throw DimensionError("ls_on_support: size mismatch");
  Vector xhat = Vector::Zero(n);
  if (support.empty()) return xhat;

  const Index r = phat.dim();
  const Index t = static_cast<Index>(support.size());

  // Psi_T' Psi_T = I_t - Q Q' with Q the support rows of phat; invert with
  // the Woodbury identity through the r x r capacitance I_r - Q'Q.
  Matrix q(t, r);
  for (Index k = 0; k < t; ++k) q.row(k) = phat.matrix().row(support[k]);

  Vector psi_y = project_off(phat, y_tilde);
  Vector b(t);
  for (Index k = 0; k < t; ++k) b(k) = psi_y(support[k]);

  if (r == 0) {
    for (Index k = 0; k < t; ++k) xhat(support[k]) = b(k);
    return xhat;
  }

  Matrix qtq = q.transpose() * q;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(qtq, Eigen::EigenvaluesOnly);
  const double sigma_max_sq = std::max(0.0, eig.eigenvalues().maxCoeff());
  const double sigma_min_sq = std::max(0.0, eig.eigenvalues().minCoeff());
  const double lambda_min = 1.0 - sigma_max_sq;
  const double lambda_max = t > r ? 1.0 : 1.0 - sigma_min_sq;
  if (!(lambda_min > 0.0) || lambda_max / lambda_min > cond_limit) {
    throw IllConditionedSupportError(
        "ls_on_support: Psi_T'Psi_T condition number exceeds limit");
  }

  Matrix capacitance = Matrix::Identity(r, r) - qtq;
  Vector correction = q * capacitance.ldlt().solve(q.transpose() * b);
  for (Index k = 0; k < t; ++k) xhat(support[k]) = b(k) + correction(k);
  return xhat;
}

}  // namespace slr
