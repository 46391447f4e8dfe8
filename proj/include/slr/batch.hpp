#pragma once

#include "slr/linalg.hpp"
#include "slr/types.hpp"

#include <vector>

namespace slr {

struct SLRDecomposition {
  Matrix lhat;
  Matrix shat;
  int iterations = 0;
  double final_residual = 0.0;  // ||M - Lhat - Shat||_F
  bool converged = true;
  /// pcp_admm only: the program objective evaluated at the feasible
  /// candidate (M - S, S) after each dual update. The raw iterate pair
  /// approaches the optimum from below and is not a useful monitor.
  std::vector<double> objective_trace;
  /// altproj only: numerical rank of Lhat at the end of each stage.
  std::vector<int> rank_trace;
};

class PcpIterationLimit : public IterationLimitError {
 public:
  PcpIterationLimit(int iterations, double residual, SLRDecomposition last)
      : IterationLimitError("pcp_admm did not converge", iterations, residual),
        last_iterate(std::move(last)) {}
  SLRDecomposition last_iterate;
};

struct AltProjConfig {
  Index rank = 1;
  double eps = 1e-6;     // relative accuracy target
  double beta = 0.0;     // 0 -> 4 * mu_hat * rank / n from a first-pass SVD
  int t_per_stage = 0;   // 0 -> ceil(10 * log(1 / eps))
};

/// Staged alternation of rank-k projection and hard thresholding. Stage k
/// projects M - S onto rank-k matrices and re-thresholds M - L at
/// beta * (sigma_{k+1} + 0.5^t sigma_k); stages run k = 1..rank with an
/// early exit when successive L iterates move less than eps/10 relative.
SLRDecomposition altproj(const Matrix& m, const AltProjConfig& config);

/// Singular value soft-thresholding, the proximal map of the nuclear norm.
Matrix svt(const Matrix& m, double tau);

/// min ||L||_* + lambda ||S||_1 s.t. M = L + S via inexact augmented
/// Lagrangian iterations; penalty starts at 1.25/sigma_1(M) and grows by 1.6
/// whenever the sparse iterate has stabilized at the current level.
/// `throw_on_limit` controls whether iteration exhaustion raises
/// PcpIterationLimit or returns the last iterate with converged = false.
SLRDecomposition pcp_admm(const Matrix& m, double lambda, double tol = 1e-7,
                          int max_iters = 500, bool throw_on_limit = false);

/// Default lambda = 1 / sqrt(max(n, d)).
double pcp_default_lambda(Index n, Index d);

/// Decomposition with partial subspace knowledge G: only the component of L
/// outside span(G) is nuclear-norm penalized. With eps_noise == 0 solves
///   min ||(I - GG')(M - S)||_* + lambda ||S||_1
/// exactly (L = M - S); with eps_noise > 0 a Frobenius slack of eps_noise is
/// allowed and Lhat = G A + L_new. Empty G reduces to pcp_admm's program.
SLRDecomposition modified_pcp(const Matrix& m, const BasisMatrix& g,
                              double lambda, double eps_noise = 0.0,
                              double tol = 1e-7, int max_iters = 500,
                              bool throw_on_limit = false);

}  // namespace slr
