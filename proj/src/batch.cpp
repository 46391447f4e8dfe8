#include "slr/batch.hpp"

#include "slr/sparse.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <vector>
#include <cmath>

namespace slr {

namespace {

struct SvtResult {
  Matrix value;
  double nuclear_norm = 0.0;  // of the thresholded output
};

SvtResult svt_with_value(const Matrix& m, double tau) {
  if (tau < 0.0) throw InvalidConfigError("svt: tau must be >= 0");
  SvtResult out;
  if (m.size() == 0) {
    out.value = m;
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tau) ++rank;
  }
  if (rank == 0) {
    out.value = Matrix::Zero(m.rows(), m.cols());
    return out;
  }
  Vector shrunk = sigma.head(rank).array() - tau;
  out.nuclear_norm = shrunk.sum();
  out.value = svd.matrixU().leftCols(rank) * shrunk.asDiagonal() *
              svd.matrixV().leftCols(rank).transpose();
  return out;
}

Matrix soft_threshold(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double v) {
    return v > tau ? v - tau : (v < -tau ? v + tau : 0.0);
  });
}

double nuclear_norm(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

}  // namespace

Matrix svt(const Matrix& m, double tau) { return svt_with_value(m, tau).value; }

double pcp_default_lambda(Index n, Index d) {
  return 1.0 / std::sqrt(static_cast<double>(std::max(n, d)));
}

SLRDecomposition altproj(const Matrix& m, const AltProjConfig& config) {
  const Index n = m.rows();
  const Index d = m.cols();
  const Index r = config.rank;
  if (r < 1 || r > std::min(n, d)) {
    throw DimensionError("altproj: rank out of range");
  }
  if (config.eps <= 0.0) throw InvalidConfigError("altproj: eps must be > 0");

  SLRDecomposition out;
  const double m_norm = m.norm();
  if (m_norm == 0.0) {
    out.lhat = Matrix::Zero(n, d);
    out.shat = Matrix::Zero(n, d);
    return out;
  }

  double beta = config.beta;
  if (beta <= 0.0) {
    // Incoherent-entry bound: |L_ij| <= sigma_1 * mu * r / sqrt(n d), so
    // beta * sigma keeps every entry of the low-rank part below threshold
    // while exceedances are attributed to the sparse part. The incoherence
    // estimate comes from a winsorized copy: when outlier magnitudes
    // dominate the spectrum, the raw top-r factors describe the outliers,
    // not the low-rank part.
    std::vector<double> magnitudes(m.data(), m.data() + m.size());
    for (double& v : magnitudes) v = std::abs(v);
    const size_t q95 = static_cast<size_t>(0.95 * (magnitudes.size() - 1));
    std::nth_element(magnitudes.begin(), magnitudes.begin() + q95,
                     magnitudes.end());
    const double clip = 3.0 * magnitudes[q95];
    const Matrix cleaned =
        clip > 0.0
            ? Matrix(m.unaryExpr(
                  [clip](double v) { return std::abs(v) > clip ? 0.0 : v; }))
            : m;
    const SvdTriple first_pass = topr_svd(cleaned, r);
    const double mu_hat = std::max(incoherence(first_pass.u),
                                   incoherence(first_pass.v));
    beta = mu_hat * static_cast<double>(r) /
           std::sqrt(static_cast<double>(n) * static_cast<double>(d));
  }
  const int iters_per_stage =
      config.t_per_stage > 0
          ? config.t_per_stage
          : static_cast<int>(std::ceil(10.0 * std::log(1.0 / config.eps)));

  const double sigma1 = topr_svd(m, 1).sigma(0);
  Matrix s = hard_threshold(m, beta * sigma1);
  Matrix l = Matrix::Zero(n, d);
  int total_iters = 0;

  for (Index k = 1; k <= r; ++k) {
    const Index probe = std::min<Index>(k + 1, std::min(n, d));
    Vector stage_sigma;
    for (int t = 1; t <= iters_per_stage; ++t) {
      const SvdTriple f = topr_svd(m - s, probe);
      Matrix l_next = f.u.matrix().leftCols(k) *
                      f.sigma.head(k).asDiagonal() *
                      f.v.matrix().leftCols(k).transpose();
      const double sigma_k = f.sigma(k - 1);
      const double sigma_k1 = probe > k ? f.sigma(k) : 0.0;
      const double threshold =
          beta * (sigma_k1 + std::pow(0.5, t) * sigma_k);
      s = hard_threshold(m - l_next, threshold);
      ++total_iters;
      stage_sigma = f.sigma.head(k);
      const double step = (l_next - l).norm();
      l = std::move(l_next);
      // Exit the stage only once the geometric term of the threshold has
      // settled; an early plateau can otherwise freeze the iteration before
      // the threshold drops low enough to catch anything.
      const bool threshold_settled =
          std::pow(0.5, t) * sigma_k <=
          0.5 * std::max(sigma_k1, config.eps * sigma1);
      if (threshold_settled && step <= config.eps / 10.0 * m_norm) break;
    }
    int rank = 0;
    for (Index i = 0; i < stage_sigma.size(); ++i) {
      if (stage_sigma(i) > 1e-12 * std::max(sigma1, 1.0)) ++rank;
    }
    out.rank_trace.push_back(rank);
  }

  out.lhat = std::move(l);
  out.shat = std::move(s);
  out.iterations = total_iters;
  out.final_residual = (m - out.lhat - out.shat).norm();
  return out;
}

SLRDecomposition pcp_admm(const Matrix& m, double lambda, double tol,
                          int max_iters, bool throw_on_limit) {
  if (lambda <= 0.0) throw InvalidConfigError("pcp_admm: lambda must be > 0");
  const Index n = m.rows();
  const Index d = m.cols();
  SLRDecomposition out;
  out.lhat = Matrix::Zero(n, d);
  out.shat = Matrix::Zero(n, d);

  const double m_fro = m.norm();
  if (m_fro == 0.0) return out;

  const double sigma1 = spectral_norm(m);
  const double dual_scale =
      std::max(sigma1, m.cwiseAbs().maxCoeff() / lambda);
  Matrix y = m / dual_scale;
  double mu = 1.25 / sigma1;
  const double mu_max = mu * 1e7;
  const double rho = 1.6;

  Matrix l = Matrix::Zero(n, d);
  Matrix s = Matrix::Zero(n, d);
  Matrix s_prev = s;
  out.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    SvtResult lsol = svt_with_value(m - s + y / mu, 1.0 / mu);
    l = std::move(lsol.value);
    s_prev = s;
    s = soft_threshold(m - l + y / mu, lambda / mu);
    Matrix residual = m - l - s;
    y += mu * residual;
    // The monitored objective is evaluated at the feasible candidate
    // (M - S, S); the raw iterate pair sits below the optimum until the
    // splitting converges, so only this quantity can decrease throughout.
    out.objective_trace.push_back(nuclear_norm(m - s) +
                                  lambda * s.cwiseAbs().sum());
    const double rel = residual.norm() / m_fro;
    if (rel <= tol) {
      out.converged = true;
      ++it;
      break;
    }
    // Penalty grows only once the sparse iterate has settled at the current
    // level; ramping regardless can lock in a feasible but wrong split.
    if (mu * (s - s_prev).norm() / m_fro < 1e-7) {
      mu = std::min(mu * rho, mu_max);
    }
  }

  out.lhat = std::move(l);
  out.shat = std::move(s);
  out.iterations = it;
  out.final_residual = (m - out.lhat - out.shat).norm();
  if (!out.converged && throw_on_limit) {
    throw PcpIterationLimit(it, out.final_residual, std::move(out));
  }
  return out;
}

SLRDecomposition modified_pcp(const Matrix& m, const BasisMatrix& g,
                              double lambda, double eps_noise, double tol,
                              int max_iters, bool throw_on_limit) {
  if (lambda <= 0.0) {
    throw InvalidConfigError("modified_pcp: lambda must be > 0");
  }
  if (eps_noise < 0.0) {
    throw InvalidConfigError("modified_pcp: eps_noise must be >= 0");
  }
  const Index n = m.rows();
  const Index d = m.cols();
  if (g.dim() > 0 && g.ambient_dim() != n) {
    throw DimensionError("modified_pcp: G ambient dimension mismatch");
  }

  SLRDecomposition out;
  out.lhat = Matrix::Zero(n, d);
  out.shat = Matrix::Zero(n, d);
  const double m_fro = m.norm();
  if (m_fro == 0.0) return out;

  // Variables: S (sparse), Z (the nuclear-norm-carrying component of
  // (I-GG')(M-S)) and the Frobenius slack R, coupled by
  //   Z + R = (I-GG')(M - S).
  // Z and R have closed-form updates; the S-step is linearized, which is a
  // valid majorization because the projector has unit spectral norm.
  const double sigma1 = spectral_norm(m);
  double mu = 1.25 / sigma1;
  const double mu_max = mu * 1e7;
  const double rho = 1.6;

  auto proj = [&](const Matrix& x) { return project_off(g, x); };

  Matrix s = Matrix::Zero(n, d);
  Matrix s_prev = s;
  Matrix pm = proj(m);
  Matrix z = pm;
  Matrix rslack = Matrix::Zero(n, d);
  Matrix y = Matrix::Zero(n, d);

  out.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    Matrix target = pm - proj(s);  // (I-GG')(M - S)
    // S-step (linearized at the current iterate).
    Matrix grad = proj(z + rslack - target + y / mu);
    s_prev = s;
    s = soft_threshold(s - grad, lambda / mu);
    target = pm - proj(s);
    // Z-step.
    z = svt(target - rslack - y / mu, 1.0 / mu);
    // R-step: projection onto the Frobenius ball of radius eps_noise.
    if (eps_noise > 0.0) {
      Matrix v = target - z - y / mu;
      const double v_norm = v.norm();
      rslack = v_norm <= eps_noise ? v : Matrix(v * (eps_noise / v_norm));
    }
    Matrix residual = z + rslack - target;
    y += mu * residual;

    const double primal = residual.norm() / m_fro;
    if (primal <= tol) {
      out.converged = true;
      ++it;
      break;
    }
    if (mu * (s - s_prev).norm() / m_fro < 1e-7) {
      mu = std::min(mu * rho, mu_max);
    }
  }

  // Lhat = G Ahat + Lhat_new with Ahat = G'(M - S).
  Matrix lhat = z;
  if (g.dim() > 0) {
    lhat += g.matrix() * (g.matrix().transpose() * (m - s));
  }
  out.lhat = std::move(lhat);
  out.shat = std::move(s);
  out.iterations = it;
  out.final_residual = (m - out.lhat - out.shat).norm();
  if (!out.converged && throw_on_limit) {
    throw PcpIterationLimit(it, out.final_residual, std::move(out));
  }
  return out;
}

}  // namespace slr
