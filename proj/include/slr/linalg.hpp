#pragma once

#include "slr/types.hpp"

namespace slr {

/// Tall matrix with mutually orthonormal columns, representing the subspace
/// spanned by them. Validates on construction.
class BasisMatrix {
 public:
  static constexpr double kOrthoTol = 1e-10;

  BasisMatrix() = default;

  /// Requires 1 <= cols <= rows and ||Q'Q - I||_max <= kOrthoTol.
  explicit BasisMatrix(Matrix q);

  /// Zero-dimensional subspace of R^n (n x 0). Used where a solver accepts
  /// "no prior subspace", e.g. a trivial projector.
  static BasisMatrix empty(Index n);

  const Matrix& matrix() const { return q_; }
  Index ambient_dim() const { return q_.rows(); }
  Index dim() const { return q_.cols(); }

  /// Max-norm deviation of Q'Q from the identity.
  double orthonormality_defect() const;

 private:
  Matrix q_;
};

/// Reduced rank-r SVD factors; sigma is nonnegative and descending.
struct SvdTriple {
  BasisMatrix u;
  Vector sigma;
  BasisMatrix v;
};

struct PrincipalAngles {
  double eps;    // sum of sin^2(theta_i)
  double zeta;   // product of cos^2(theta_i)
  Vector theta;  // angles in radians, ascending
};

/// Orthonormal basis with the same span and column order as m (QR with the
/// diagonal of R made positive, so already-orthonormal input is preserved).
/// Throws RankDeficientError when the numerical rank of m is below its column
/// count at tolerance 1e-10.
BasisMatrix orthonormalize(const Matrix& m);

/// Top-r singular triple of m. Deterministic: the largest-magnitude entry of
/// each left singular vector is made positive (first such entry on ties).
SvdTriple topr_svd(const Matrix& m, Index r);

/// SE(phat, p) = ||(I - phat phat') p||_2, the sine of the largest principal
/// angle between the subspaces. Requires equal ambient dimension.
double subspace_error(const BasisMatrix& phat, const BasisMatrix& p);

/// Principal angles between two subspaces of equal dimension, with the
/// summary statistics used by the subspace trackers.
PrincipalAngles principal_angle_stats(const BasisMatrix& phat,
                                      const BasisMatrix& p);

/// Smallest mu with max_i ||p^(i)||^2 <= mu * r / n, i.e. (n/r) times the
/// largest squared row norm. Always >= 1.
double incoherence(const BasisMatrix& p);

/// exp(delta * b) * p re-orthonormalized; b must be skew-symmetric to 1e-12
/// entrywise and delta >= 0, else InvalidRotationError.
BasisMatrix rotate_subspace(const BasisMatrix& p, double delta,
                            const Matrix& b);

/// exp(a) * x by scaled Taylor series on the action; a square.
Matrix expm_multiply(const Matrix& a, const Matrix& x);

/// (I - P P') X without forming the projector.
Matrix project_off(const BasisMatrix& p, const Matrix& x);
Vector project_off(const BasisMatrix& p, const Vector& x);

/// Largest singular value via the Gram matrix of the smaller side.
double spectral_norm(const Matrix& m);

}  // namespace slr
