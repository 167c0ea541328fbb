#include "cme/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "cme/errors.hpp"

namespace cme {

MatrixXd gamma_as_matrix(const VectorXd& gamma, Index k1, Index k2) {
  if (gamma.size() != k1 * k2) throw ConfigError("gamma length does not equal k1*k2");
  return Eigen::Map<const MatrixXd>(gamma.data(), k1, k2);
}

LowRankFactor low_rank_factor(const MatrixXd& Z, const ProjectionPair& proj, const VectorXd& gamma) {
  if (Z.cols() != proj.q()) throw DataError("low_rank_factor: Z columns do not match q");
  const MatrixXd G = gamma_as_matrix(gamma, proj.k1(), proj.k2());
  return {(Z * proj.S().transpose()) * (G * proj.r_gram_factor())};
}

LowRankFactor low_rank_factor_projected(const MatrixXd& ZSt, const MatrixXd& gamma_lr) {
  if (ZSt.cols() != gamma_lr.rows()) throw DataError("low_rank_factor: dimension mismatch");
  return {ZSt * gamma_lr};
}

VectorXd woodbury_inverse_apply(const LowRankFactor& f, const VectorXd& v) {
  if (v.size() != f.m()) throw DataError("woodbury_inverse_apply: dimension mismatch");
  const Index k = f.k2();
  MatrixXd inner = MatrixXd::Identity(k, k);
  inner.selfadjointView<Eigen::Lower>().rankUpdate(f.M.transpose());
  Eigen::LLT<MatrixXd> llt(inner.selfadjointView<Eigen::Lower>());
  const VectorXd proj = f.M.transpose() * v;
  return v - f.M * llt.solve(proj);
}

InverseSqrt::InverseSqrt(const LowRankFactor& f) {
  if (f.M.size() == 0) {
    U_.resize(f.m(), 0);
    shrink_.resize(0);
    return;
  }
  Eigen::JacobiSVD<MatrixXd> svd(f.M, Eigen::ComputeThinU);
  U_ = svd.matrixU();
  const VectorXd& s = svd.singularValues();
  shrink_ = (1.0 - (1.0 + s.array().square()).rsqrt()).matrix();
}

MatrixXd InverseSqrt::apply(const MatrixXd& A) const {
  if (A.rows() != U_.rows()) throw DataError("inverse_sqrt_apply: dimension mismatch");
  if (U_.cols() == 0) return A;
  return A - U_ * (shrink_.asDiagonal() * (U_.transpose() * A));
}

VectorXd InverseSqrt::apply(const VectorXd& v) const {
  if (v.size() != U_.rows()) throw DataError("inverse_sqrt_apply: dimension mismatch");
  if (U_.cols() == 0) return v;
  return v - U_ * (shrink_.asDiagonal() * (U_.transpose() * v));
}

MatrixXd inverse_sqrt_apply(const LowRankFactor& f, const MatrixXd& A) {
  return InverseSqrt(f).apply(A);
}

MatrixXd kron_row_block_projected(const MatrixXd& ZSt, const VectorXd& d) {
  const Index k1 = ZSt.cols();
  MatrixXd block(ZSt.rows(), k1 * d.size());
  for (Index j = 0; j < d.size(); ++j) block.middleCols(j * k1, k1) = d(j) * ZSt;
  return block;
}

MatrixXd kron_row_block(const MatrixXd& Z, const MatrixXd& S, const VectorXd& d) {
  if (Z.cols() != S.cols()) throw DataError("kron_row_block: Z and S column counts differ");
  return kron_row_block_projected(Z * S.transpose(), d);
}

MatrixXd jittered_cholesky(const MatrixXd& A, std::string_view what) {
  if (A.rows() != A.cols()) throw DataError("cholesky: " + std::string(what) + " is not square");
  if (!A.allFinite()) throw NumericError("cholesky: " + std::string(what) + " has non-finite entries");
  const Index k = A.rows();
  if (k == 0) return MatrixXd(0, 0);

  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double base = 1e-10 * std::abs(A.trace()) / static_cast<double>(k);
  double jitter = base > 0 ? base : 1e-10;
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10) {
    MatrixXd B = A;
    B.diagonal().array() += jitter;
    llt.compute(B);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericError("cholesky failed for " + std::string(what) + " after jitter escalation");
}

VectorXd mvn_sample(const VectorXd& mean, const MatrixXd& cov, Rng& rng) {
  if (cov.rows() != mean.size()) throw DataError("mvn_sample: dimension mismatch");
  const MatrixXd L = jittered_cholesky(cov, "mvn covariance");
  return mean + L * rng.normal_vector(mean.size());
}

VectorXd gaussian_from_precision(const MatrixXd& precision, const VectorXd& linear, double scale,
                                 Rng& rng, std::string_view what) {
  const MatrixXd L = jittered_cholesky(precision, what);
  const auto tri = L.triangularView<Eigen::Lower>();
  VectorXd mean = tri.solve(linear);
  tri.transpose().solveInPlace(mean);
  VectorXd noise = rng.normal_vector(linear.size());
  tri.transpose().solveInPlace(noise);
  return mean + scale * noise;
}

MatrixXd bspline_basis(const VectorXd& times, double lo, double hi, Index n_basis) {
  if (n_basis != 3) throw ConfigError("bspline_basis: only the 3-column cubic basis is supported");
  if (times.size() == 0) throw DataError("bspline_basis: no time points");
  if (!times.allFinite()) throw DataError("bspline_basis: non-finite time points");
  if (!(hi > lo)) throw DataError("bspline_basis: degenerate time range");

  // With no interior knots the cubic B-splines are the Bernstein polynomials
  // on [lo, hi]; the first one plays the role of the intercept and is dropped.
  MatrixXd B(times.size(), 3);
  for (Index r = 0; r < times.size(); ++r) {
    const double t = std::clamp((times(r) - lo) / (hi - lo), 0.0, 1.0);
    const double u = 1.0 - t;
    B(r, 0) = 3.0 * t * u * u;
    B(r, 1) = 3.0 * t * t * u;
    B(r, 2) = t * t * t;
  }
  return B;
}

MatrixXd bspline_basis(const VectorXd& times, Index n_basis) {
  if (times.size() == 0) throw DataError("bspline_basis: no time points");
  return bspline_basis(times, times.minCoeff(), times.maxCoeff(), n_basis);
}

}  // namespace cme
