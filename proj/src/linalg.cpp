#include "slr/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slr {

namespace {

// Small problems go through Jacobi SVD; larger ones through the Gram matrix
// of the shorter side, which is much cheaper for the wide buffers the
// trackers produce (n x alpha, n x d with d >> n).
constexpr Index kDirectSvdLimit = 32;

// Orthonormalizes v in place by two passes of modified Gram-Schmidt,
// preserving column order and direction. Columns that vanish (possible when
// the requested rank exceeds the numerical rank) are replaced by the first
// standard basis vector with a nonzero projection onto the complement.
void polish_orthonormal(Matrix& v) {
  const Index n = v.rows();
  const Index r = v.cols();
  for (Index i = 0; i < r; ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < i; ++j) {
        v.col(i) -= (v.col(j).dot(v.col(i))) * v.col(j);
      }
    }
    double norm = v.col(i).norm();
    if (norm < 1e-8) {
      for (Index e = 0; e < n; ++e) {
        Vector cand = Vector::Zero(n);
        cand(e) = 1.0;
        for (Index j = 0; j < i; ++j) {
          cand -= (v.col(j).dot(cand)) * v.col(j);
        }
        if (cand.norm() > 0.5) {
          v.col(i) = cand;
          break;
        }
      }
      norm = v.col(i).norm();
    }
    v.col(i) /= norm;
  }
}

void apply_sign_convention(Matrix& u, Matrix& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) {
      u.col(j) = -u.col(j);
      if (v.cols() > j) v.col(j) = -v.col(j);
    }
  }
}

}  // namespace

BasisMatrix::BasisMatrix(Matrix q) : q_(std::move(q)) {
  if (q_.cols() < 1 || q_.cols() > q_.rows()) {
    throw DimensionError("BasisMatrix requires 1 <= r <= n, got " +
                         std::to_string(q_.rows()) + "x" +
                         std::to_string(q_.cols()));
  }
  const double defect = orthonormality_defect();
  if (!(defect <= kOrthoTol)) {
    throw RankDeficientError("BasisMatrix columns not orthonormal, defect " +
                             std::to_string(defect));
  }
}

BasisMatrix BasisMatrix::empty(Index n) {
  BasisMatrix b;
  b.q_ = Matrix(n, 0);
  return b;
}

double BasisMatrix::orthonormality_defect() const {
  if (q_.cols() == 0) return 0.0;
  Matrix gram = q_.transpose() * q_;
  gram.diagonal().array() -= 1.0;
  return gram.cwiseAbs().maxCoeff();
}

BasisMatrix orthonormalize(const Matrix& m) {
  const Index n = m.rows();
  const Index r = m.cols();
  if (r == 0) return BasisMatrix::empty(n);
  if (r > n) {
    throw DimensionError("orthonormalize: more columns than rows");
  }

  Eigen::ColPivHouseholderQR<Matrix> rank_probe(m);
  rank_probe.setThreshold(1e-10);
  if (rank_probe.rank() < r) {
    throw RankDeficientError("orthonormalize: numerical rank " +
                             std::to_string(rank_probe.rank()) + " < " +
                             std::to_string(r));
  }

  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix r_factor =
      qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Index j = 0; j < r; ++j) {
    if (r_factor(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return BasisMatrix(std::move(q));
}

SvdTriple topr_svd(const Matrix& m, Index r) {
  const Index n = m.rows();
  const Index d = m.cols();
  if (r < 1 || r > std::min(n, d)) {
    throw DimensionError("topr_svd: rank " + std::to_string(r) +
                         " out of range for " + std::to_string(n) + "x" +
                         std::to_string(d));
  }

  Matrix u, v;
  Vector sigma(r);

  if (std::min(n, d) <= kDirectSvdLimit) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU().leftCols(r);
    v = svd.matrixV().leftCols(r);
    sigma = svd.singularValues().head(r);
  } else if (n <= d) {
    Matrix gram = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    u.resize(n, r);
    for (Index i = 0; i < r; ++i) u.col(i) = eig.eigenvectors().col(n - 1 - i);
    Matrix w = m.transpose() * u;
    v.resize(d, r);
    for (Index i = 0; i < r; ++i) {
      const double s = w.col(i).norm();
      sigma(i) = s;
      v.col(i) = s > 0.0 ? Vector(w.col(i) / s) : Vector(Vector::Zero(d));
    }
    polish_orthonormal(v);
  } else {
    Matrix gram = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    v.resize(d, r);
    for (Index i = 0; i < r; ++i) v.col(i) = eig.eigenvectors().col(d - 1 - i);
    Matrix w = m * v;
    u.resize(n, r);
    for (Index i = 0; i < r; ++i) {
      const double s = w.col(i).norm();
      sigma(i) = s;
      u.col(i) = s > 0.0 ? Vector(w.col(i) / s) : Vector(Vector::Zero(n));
    }
    polish_orthonormal(u);
  }

  // Rounding in the Gram path can micro-invert (near-)equal singular values.
  std::vector<Index> order(static_cast<size_t>(r));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return sigma(a) > sigma(b); });
  Matrix u_sorted(n, r), v_sorted(d, r);
  Vector sigma_sorted(r);
  for (Index i = 0; i < r; ++i) {
    u_sorted.col(i) = u.col(order[static_cast<size_t>(i)]);
    v_sorted.col(i) = v.col(order[static_cast<size_t>(i)]);
    sigma_sorted(i) = std::max(0.0, sigma(order[static_cast<size_t>(i)]));
  }

  apply_sign_convention(u_sorted, v_sorted);
  return SvdTriple{BasisMatrix(std::move(u_sorted)), std::move(sigma_sorted),
                   BasisMatrix(std::move(v_sorted))};
}

Matrix project_off(const BasisMatrix& p, const Matrix& x) {
  if (p.dim() == 0) return x;
  return x - p.matrix() * (p.matrix().transpose() * x);
}

Vector project_off(const BasisMatrix& p, const Vector& x) {
  if (p.dim() == 0) return x;
  return x - p.matrix() * (p.matrix().transpose() * x);
}

double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  if (std::min(m.rows(), m.cols()) <= kDirectSvdLimit) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose())
                                     : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double subspace_error(const BasisMatrix& phat, const BasisMatrix& p) {
  if (phat.ambient_dim() != p.ambient_dim()) {
    throw DimensionError("subspace_error: ambient dimensions differ");
  }
  if (p.dim() == 0) return 0.0;
  Matrix residual = project_off(phat, p.matrix());
  Matrix gram = residual.transpose() * residual;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double top = std::max(0.0, eig.eigenvalues().maxCoeff());
  return std::min(1.0, std::sqrt(top));
}

PrincipalAngles principal_angle_stats(const BasisMatrix& phat,
                                      const BasisMatrix& p) {
  if (phat.ambient_dim() != p.ambient_dim() || phat.dim() != p.dim()) {
    throw DimensionError("principal_angle_stats: dimensions differ");
  }
  const Index r = p.dim();
  PrincipalAngles out{0.0, 1.0, Vector(r)};
  if (r == 0) return out;

  // Cosines from P̂'P, sines from (I - P̂P̂')P; each is accurate where the
  // other cancels, so angles are taken from whichever side is well
  // conditioned (cos for large angles, sin for small ones).
  Eigen::JacobiSVD<Matrix> csvd(phat.matrix().transpose() * p.matrix());
  Vector cosines = csvd.singularValues().cwiseMin(1.0).cwiseMax(0.0);

  Matrix residual = project_off(phat, p.matrix());
  Matrix gram = residual.transpose() * residual;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  Vector sines(r);  // ascending, matching cosines' descending order
  for (Index i = 0; i < r; ++i) {
    sines(i) = std::sqrt(std::min(
        1.0, std::max(0.0, eig.eigenvalues()(i))));
  }

  double eps = 0.0;
  double zeta = 1.0;
  for (Index i = 0; i < r; ++i) {
    const double c = cosines(i);
    const double s = sines(i);
    out.theta(i) = (s <= M_SQRT1_2) ? std::asin(s) : std::acos(c);
    eps += s * s;
    zeta *= c * c;
  }
  out.eps = eps;
  out.zeta = zeta;
  return out;
}

double incoherence(const BasisMatrix& p) {
  const Index n = p.ambient_dim();
  const Index r = p.dim();
  if (r == 0) throw DimensionError("incoherence: empty basis");
  const double max_row = p.matrix().rowwise().squaredNorm().maxCoeff();
  return max_row * static_cast<double>(n) / static_cast<double>(r);
}

Matrix expm_multiply(const Matrix& a, const Matrix& x) {
  if (a.rows() != a.cols() || a.cols() != x.rows()) {
    throw DimensionError("expm_multiply: incompatible shapes");
  }
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int splits = 0;
  if (norm > 2.0) {
    splits = static_cast<int>(std::ceil(std::log2(norm / 2.0)));
    splits = std::min(splits, 40);
  }
  const double scale = std::ldexp(1.0, -splits);
  const Matrix a_scaled = a * scale;
  Matrix y = x;
  const long applications = 1L << splits;
  for (long s = 0; s < applications; ++s) {
    Matrix term = y;
    Matrix acc = y;
    for (int k = 1; k <= 80; ++k) {
      term = (a_scaled * term) / static_cast<double>(k);
      acc += term;
      if (term.norm() <= 1e-16 * acc.norm()) break;
    }
    y = acc;
  }
  return y;
}

BasisMatrix rotate_subspace(const BasisMatrix& p, double delta,
                            const Matrix& b) {
  if (b.rows() != b.cols() || b.rows() != p.ambient_dim()) {
    throw DimensionError("rotate_subspace: rotation generator shape mismatch");
  }
  if (!(delta >= 0.0)) {
    throw InvalidRotationError("rotate_subspace: delta must be >= 0");
  }
  const double skew_defect = (b + b.transpose()).cwiseAbs().maxCoeff();
  if (skew_defect > 1e-12) {
    throw InvalidRotationError("rotate_subspace: generator not skew-symmetric"
                               ", defect " + std::to_string(skew_defect));
  }
  if (delta == 0.0) return p;
  Matrix rotated = expm_multiply(delta * b, p.matrix());
  return orthonormalize(rotated);
}

}  // namespace slr
