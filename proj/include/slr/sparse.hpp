#pragma once

#include "slr/linalg.hpp"
#include "slr/types.hpp"

namespace slr {

/// Sensing operator used by the l1 solver. Implementations must be safe for
/// concurrent const use.
class LinearOp {
 public:
  virtual ~LinearOp() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_adjoint(const Vector& y) const = 0;
  /// Upper bound on the largest singular value.
  virtual double norm_bound() const = 0;
};

class DenseOp final : public LinearOp {
 public:
  explicit DenseOp(Matrix a);
  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  Vector apply(const Vector& x) const override { return a_ * x; }
  Vector apply_adjoint(const Vector& y) const override {
    return a_.transpose() * y;
  }
  double norm_bound() const override { return norm_bound_; }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
  double norm_bound_;
};

/// The projector Psi = I - P P' applied as two thin products, never formed.
class ProjectorOp final : public LinearOp {
 public:
  explicit ProjectorOp(const BasisMatrix& basis) : basis_(&basis) {}
  Index rows() const override { return basis_->ambient_dim(); }
  Index cols() const override { return basis_->ambient_dim(); }
  Vector apply(const Vector& x) const override {
    return project_off(*basis_, x);
  }
  Vector apply_adjoint(const Vector& y) const override {
    return project_off(*basis_, y);
  }
  double norm_bound() const override { return 1.0; }
  const BasisMatrix& basis() const { return *basis_; }

 private:
  const BasisMatrix* basis_;
};

struct L1Problem {
  const LinearOp& a;
  Vector y;
  double xi = 0.0;  // noise bound; >= 0
  int max_iters = 2000;
  double tol = 1e-7;
};

struct BpdnResult {
  Vector x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||y - A x||
  bool converged = false;
};

/// min ||x||_1  s.t.  ||y - A x|| <= xi, by ADMM with a linearized x-step
/// (valid since the step size is tied to norm_bound) and residual-balanced
/// penalty adaptation. Never throws on iteration exhaustion; see `converged`.
BpdnResult l1_bpdn_solve(const LinearOp& a, const Vector& y, double xi,
                         double tol = 1e-7, int max_iters = 2000);

/// Throwing wrapper around l1_bpdn_solve.
Vector l1_bpdn(const L1Problem& problem);

class BpdnIterationLimit : public IterationLimitError {
 public:
  BpdnIterationLimit(int iterations, double residual, Vector last)
      : IterationLimitError("l1_bpdn did not converge", iterations, residual),
        last_iterate(std::move(last)) {}
  Vector last_iterate;
};

/// Entrywise hard threshold: keeps values with |v| strictly above beta.
Matrix hard_threshold(const Matrix& m, double beta);

/// Indices with |x_i| strictly above omega.
IndexSet support_threshold(const Vector& x, double omega);

/// Least squares on a known support against the projector Psi = I - P P':
/// xhat = I_T (Psi_T' Psi_T)^{-1} Psi_T' y_tilde, solved through the Woodbury
/// identity in O(|T| r^2). Throws IllConditionedSupportError when
/// cond(Psi_T' Psi_T) exceeds cond_limit.
Vector ls_on_support(const BasisMatrix& phat, const Vector& y_tilde,
                     const IndexSet& support, double cond_limit = 1e12);

}  // namespace slr
