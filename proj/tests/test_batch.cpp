#include "slr/batch.hpp"

#include "slr/rng.hpp"
#include "slr/synthgen.hpp"

#include <Eigen/SVD>
#include <doctest.h>

#include <cmath>

using namespace slr;

namespace {

Matrix seeded_gaussian(Index rows, Index cols, uint64_t seed) {
  Philox rng(seed, 0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

// Incoherent rank-r test matrix: product of orthonormalized Gaussians with
// the given spectrum.
Matrix lowrank_instance(Index n, Index d, const Vector& spectrum,
                        uint64_t seed) {
  const Index r = spectrum.size();
  BasisMatrix u = orthonormalize(seeded_gaussian(n, r, seed));
  BasisMatrix v = orthonormalize(seeded_gaussian(d, r, seed + 1));
  return u.matrix() * spectrum.asDiagonal() * v.matrix().transpose();
}

Matrix sparse_outliers(Index n, Index d, Index count, double magnitude,
                       uint64_t seed) {
  Philox rng(seed, 7);
  Matrix s = Matrix::Zero(n, d);
  Index placed = 0;
  while (placed < count) {
    const Index i = static_cast<Index>(rng.next_double() * n);
    const Index j = static_cast<Index>(rng.next_double() * d);
    if (s(i, j) != 0.0) continue;
    s(i, j) = rng.next_double() < 0.5 ? magnitude : -magnitude;
    ++placed;
  }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("batch");

TEST_CASE("svt basics") {
  Matrix m = seeded_gaussian(8, 6, 2);
  CHECK((svt(m, 0.0) - m).cwiseAbs().maxCoeff() <= 1e-12);

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 3.0;
  diag(1, 1) = 1.0;
  Matrix shrunk = svt(diag, 2.0);
  CHECK(shrunk(0, 0) == doctest::Approx(1.0));
  CHECK(shrunk(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("svt output nuclear norm matches the shrunk spectrum") {
  Matrix m = seeded_gaussian(12, 9, 3);
  const double tau = 1.5;
  Matrix out = svt(m, tau);
  Eigen::JacobiSVD<Matrix> full(m);
  double expected = 0.0;
  for (Index i = 0; i < full.singularValues().size(); ++i) {
    expected += std::max(full.singularValues()(i) - tau, 0.0);
  }
  Eigen::JacobiSVD<Matrix> of(out);
  CHECK(of.singularValues().sum() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("pcp on the zero matrix returns zeros") {
  SLRDecomposition dec = pcp_admm(Matrix::Zero(10, 10), 0.1);
  CHECK(dec.lhat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dec.shat.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pcp recovers a rank-1 matrix with scattered outliers") {
  const Index n = 40;
  Vector spectrum(1);
  spectrum << 5.0 * n / 8.0;
  Matrix l = lowrank_instance(n, n, spectrum, 11);
  Matrix s = sparse_outliers(n, n, 20, 1.0, 12);
  Matrix m = l + s;
  SLRDecomposition dec =
      pcp_admm(m, pcp_default_lambda(n, n), 1e-9, 500);
  CHECK(dec.converged);
  CHECK((dec.lhat - l).norm() / l.norm() <= 1e-4);
  CHECK(dec.final_residual / m.norm() <= 1e-9);
}

TEST_CASE("pcp cannot rescue a fully corrupted column") {
  const Index n = 40;
  Vector spectrum(1);
  spectrum << 5.0 * n / 8.0;
  Matrix l = lowrank_instance(n, n, spectrum, 21);
  Matrix m = l;
  Philox rng(22, 0);
  for (Index i = 0; i < n; ++i) m(i, 9) = 3.0 * rng.normal();
  SLRDecomposition dec = pcp_admm(m, pcp_default_lambda(n, n), 1e-9, 500);
  const double column_err = (dec.lhat.col(9) - l.col(9)).norm() /
                            l.col(9).norm();
  CHECK(column_err > 0.1);
}

TEST_CASE("pcp objective is non-increasing after the first dual update") {
  const Index n = 30;
  Vector spectrum(2);
  spectrum << 12.0, 7.0;
  Matrix m = lowrank_instance(n, n, spectrum, 31) +
             sparse_outliers(n, n, 25, 2.0, 32);
  SLRDecomposition dec = pcp_admm(m, pcp_default_lambda(n, n), 1e-9, 400);
  REQUIRE(dec.objective_trace.size() > 3);
  const double slack = 1e-8 * dec.objective_trace.front();
  for (size_t k = 2; k < dec.objective_trace.size(); ++k) {
    CHECK(dec.objective_trace[k] <= dec.objective_trace[k - 1] + slack);
  }
}

TEST_CASE("altproj leaves an exactly low-rank matrix alone") {
  Vector spectrum(3);
  spectrum << 10.0, 6.0, 3.0;
  Matrix m = lowrank_instance(50, 70, spectrum, 41);
  AltProjConfig cfg;
  cfg.rank = 3;
  cfg.eps = 1e-9;
  SLRDecomposition dec = altproj(m, cfg);
  CHECK(dec.shat.cwiseAbs().maxCoeff() == 0.0);
  CHECK((dec.lhat - m).norm() <= 1e-9 * m.norm());
}

TEST_CASE("altproj separates incoherent low rank from sparse outliers") {
  // Rank-2, 1% outliers of magnitude 10.
  const Index n = 60;
  Vector spectrum(2);
  spectrum << 60.0, 30.0;
  Matrix l = lowrank_instance(n, n, spectrum, 51);
  Matrix s = sparse_outliers(n, n, 36, 10.0, 52);
  AltProjConfig cfg;
  cfg.rank = 2;
  cfg.eps = 1e-6;
  SLRDecomposition dec = altproj(l + s, cfg);
  CHECK((dec.lhat - l).norm() / l.norm() <= 1e-4);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (dec.shat(i, j) != 0.0) CHECK(s(i, j) != 0.0);
    }
  }
}

TEST_CASE("altproj stage rank never exceeds the stage index") {
  Vector spectrum(4);
  spectrum << 20.0, 11.0, 5.0, 2.0;
  Matrix m = lowrank_instance(40, 40, spectrum, 61) +
             sparse_outliers(40, 40, 16, 4.0, 62);
  AltProjConfig cfg;
  cfg.rank = 4;
  cfg.eps = 1e-6;
  SLRDecomposition dec = altproj(m, cfg);
  REQUIRE(dec.rank_trace.size() == 4);
  for (size_t k = 0; k < dec.rank_trace.size(); ++k) {
    CHECK(dec.rank_trace[k] <= static_cast<int>(k) + 1);
  }
}

TEST_CASE("altproj validates the requested rank") {
  Matrix m = seeded_gaussian(5, 8, 1);
  AltProjConfig cfg;
  cfg.rank = 6;
  CHECK_THROWS_AS(altproj(m, cfg), DimensionError);
}

TEST_CASE("modified pcp with a spanning prior needs no new directions") {
  Vector spectrum(3);
  spectrum << 9.0, 5.0, 2.0;
  Matrix l = lowrank_instance(40, 60, spectrum, 71);
  BasisMatrix g = topr_svd(l, 3).u;
  SLRDecomposition dec =
      modified_pcp(l, g, pcp_default_lambda(40, 60), 0.0, 1e-9, 400);
  CHECK(dec.converged);
  CHECK((dec.lhat - l).norm() / l.norm() <= 1e-6);
  CHECK(dec.shat.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("modified pcp noisy form absorbs small dense noise") {
  Vector spectrum(3);
  spectrum << 9.0, 5.0, 2.0;
  Matrix l = lowrank_instance(40, 60, spectrum, 75);
  Matrix noise = 1e-4 * seeded_gaussian(40, 60, 76);
  BasisMatrix g = topr_svd(l, 3).u;
  SLRDecomposition dec = modified_pcp(l + noise, g, pcp_default_lambda(40, 60),
                                      noise.norm(), 1e-8, 600);
  CHECK((dec.lhat - l).norm() / l.norm() <= 1e-3);
  CHECK(dec.shat.cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("modified pcp with empty prior equals pcp") {
  const Index n = 40;
  Vector spectrum(1);
  spectrum << 5.0 * n / 8.0;
  Matrix m = lowrank_instance(n, n, spectrum, 81) +
             sparse_outliers(n, n, 20, 1.0, 82);
  const double lambda = pcp_default_lambda(n, n);
  SLRDecomposition a = pcp_admm(m, lambda, 1e-10, 1000);
  SLRDecomposition b = modified_pcp(m, BasisMatrix::empty(n), lambda, 0.0,
                                    1e-10, 2000);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK((a.lhat - b.lhat).norm() / a.lhat.norm() <= 1e-8);
  CHECK((a.shat - b.shat).norm() / std::max(a.shat.norm(), 1.0) <= 1e-7);
}

TEST_CASE("modified pcp tracks one added direction with small outliers") {
  const Index n = 60, d = 300, r_old = 4;
  BasisMatrix old_basis = orthonormalize(seeded_gaussian(n, r_old, 91));
  // One new orthogonal direction appended to the prior span.
  Matrix extended(n, r_old + 1);
  extended.leftCols(r_old) = old_basis.matrix();
  extended.col(r_old) = seeded_gaussian(n, 1, 92);
  BasisMatrix p_new = orthonormalize(extended);

  Philox rng(93, 0);
  Matrix coeffs(r_old + 1, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i <= r_old; ++i) coeffs(i, j) = 3.0 * rng.normal();
  }
  Matrix l = p_new.matrix() * coeffs;
  Matrix s = sparse_outliers(n, d, static_cast<Index>(0.01 * n * d), 5.0, 94);
  SLRDecomposition dec = modified_pcp(l + s, old_basis,
                                      pcp_default_lambda(n, d), 0.0, 1e-9,
                                      600);
  CHECK((dec.lhat - l).norm() / l.norm() <= 1e-3);
}

TEST_CASE("feasibility at exit for converged runs") {
  const Index n = 35;
  Vector spectrum(2);
  spectrum << 10.0, 4.0;
  Matrix m = lowrank_instance(n, n, spectrum, 95) +
             sparse_outliers(n, n, 12, 2.0, 96);
  const double tol = 1e-8;
  SLRDecomposition dec = pcp_admm(m, pcp_default_lambda(n, n), tol, 600);
  CHECK(dec.converged);
  CHECK(dec.final_residual / m.norm() <= tol);
}

TEST_SUITE_END();
