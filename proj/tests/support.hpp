#pragma once

// Shared fixtures and independent dense oracles for the unit and acceptance tests.

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cme/gibbs.hpp"
#include "cme/linalg.hpp"
#include "cme/model.hpp"
#include "cme/rng.hpp"

namespace cme::test {

inline DataSet random_dataset(Index n, Index m, Index p, Index q, Rng& rng, bool ragged = false) {
  DataSet d;
  d.p = p;
  d.q = q;
  for (Index i = 0; i < n; ++i) {
    const Index mi = ragged ? 1 + (i % m) : m;
    SubjectBlock b;
    b.id = "s" + std::to_string(i + 1);
    b.X = rng.normal_matrix(mi, p);
    b.Z = rng.normal_matrix(mi, q);
    b.y = rng.normal_vector(mi);
    d.blocks.push_back(std::move(b));
  }
  return d;
}

inline ChainState random_state(Index p, Index k1, Index k2, Index n, Rng& rng) {
  ChainState s;
  s.beta = rng.normal_vector(p);
  s.tau2 = 0.5 + rng.uniform(0, 1);
  s.gamma = rng.normal_vector(k1 * k2);
  s.lambda2 = (rng.normal_vector(p).array().square() + 0.1).matrix();
  s.delta2 = 0.3 + rng.uniform(0, 1);
  s.nu = (rng.normal_vector(p).array().square() + 0.1).matrix();
  s.xi = 0.3 + rng.uniform(0, 1);
  for (Index i = 0; i < n; ++i) s.d.push_back(rng.normal_vector(k2));
  return s;
}

// log N(x; mu, Sigma), by Cholesky.
inline double log_mvn(const VectorXd& x, const VectorXd& mu, const MatrixXd& cov) {
  const Eigen::LLT<MatrixXd> llt(cov);
  const VectorXd z = llt.matrixL().solve(x - mu);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (z.squaredNorm() + logdet + static_cast<double>(x.size()) * std::log(2 * std::numbers::pi));
}

inline double log_inv_gamma(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1) * std::log(x) - scale / x;
}

// Dense compressed covariance C_i = Z S^T Gamma R R^T Gamma^T S Z^T + I.
inline MatrixXd dense_c(const MatrixXd& Z, const ProjectionPair& proj, const VectorXd& gamma) {
  MatrixXd G(proj.k1(), proj.k2());
  for (Index c = 0; c < proj.k2(); ++c)
    for (Index r = 0; r < proj.k1(); ++r) G(r, c) = gamma(c * proj.k1() + r);
  const MatrixXd A = Z * proj.S().transpose() * G * proj.R();
  return A * A.transpose() + MatrixXd::Identity(Z.rows(), Z.rows());
}

inline MatrixXd gamma_matrix(const VectorXd& gamma, Index k1, Index k2) {
  MatrixXd G(k1, k2);
  for (Index c = 0; c < k2; ++c)
    for (Index r = 0; r < k1; ++r) G(r, c) = gamma(c * k1 + r);
  return G;
}

// Full joint with d_i present (log, up to nothing: every term normalised).
inline double log_joint_with_d(const DataSet& d, const ProjectionPair& proj, const PriorConfig& prior,
                               const ChainState& s) {
  const MatrixXd G = gamma_matrix(s.gamma, proj.k1(), proj.k2());
  const MatrixXd RRt = proj.R() * proj.R().transpose();
  double lp = 0;
  for (Index i = 0; i < d.n(); ++i) {
    const auto& b = d.blocks[static_cast<std::size_t>(i)];
    const VectorXd& di = s.d[static_cast<std::size_t>(i)];
    const VectorXd mu = b.X * s.beta + b.Z * proj.S().transpose() * G * di;
    lp += log_mvn(b.y, mu, s.tau2 * MatrixXd::Identity(b.m(), b.m()));
    lp += log_mvn(di, VectorXd::Zero(di.size()), s.tau2 * RRt);
  }
  lp += log_mvn(s.gamma, VectorXd::Zero(s.gamma.size()),
                prior.sigma2_gamma * MatrixXd::Identity(s.gamma.size(), s.gamma.size()));
  return lp;
}

// Horseshoe hierarchy: beta_j | . ~ N(0, tau2 delta2 lambda2_j), scale mixtures and tau2 prior.
inline double log_shrinkage_prior(const ChainState& s, const PriorConfig& prior) {
  double lp = log_inv_gamma(s.tau2, prior.a0, prior.b0);
  lp += log_inv_gamma(s.xi, 0.5, 1.0) + log_inv_gamma(s.delta2, 0.5, 1.0 / s.xi);
  for (Index j = 0; j < s.beta.size(); ++j) {
    const double v = s.tau2 * s.delta2 * s.lambda2(j);
    lp += -0.5 * (std::log(2 * std::numbers::pi * v) + s.beta(j) * s.beta(j) / v);
    lp += log_inv_gamma(s.nu(j), 0.5, 1.0) + log_inv_gamma(s.lambda2(j), 0.5, 1.0 / s.nu(j));
  }
  return lp;
}

// Collapsed likelihood with d_i integrated out: y_i ~ N(X_i beta, tau2 C_i).
inline double log_collapsed_likelihood(const DataSet& d, const ProjectionPair& proj, const ChainState& s) {
  double lp = 0;
  for (const auto& b : d.blocks) lp += log_mvn(b.y, b.X * s.beta, s.tau2 * dense_c(b.Z, proj, s.gamma));
  return lp;
}

// Clamped cubic B-splines on [lo, hi] with no interior knots by the Cox-de Boor recursion.
inline double cox_de_boor(int i, int k, double t, const std::vector<double>& knots) {
  if (k == 0) {
    const bool last = t == knots.back() && knots[static_cast<std::size_t>(i + 1)] == knots.back() &&
                      knots[static_cast<std::size_t>(i)] < knots[static_cast<std::size_t>(i + 1)];
    return ((knots[static_cast<std::size_t>(i)] <= t && t < knots[static_cast<std::size_t>(i + 1)]) || last) ? 1.0 : 0.0;
  }
  double out = 0;
  const double a = knots[static_cast<std::size_t>(i + k)] - knots[static_cast<std::size_t>(i)];
  const double b = knots[static_cast<std::size_t>(i + k + 1)] - knots[static_cast<std::size_t>(i + 1)];
  if (a > 0) out += (t - knots[static_cast<std::size_t>(i)]) / a * cox_de_boor(i, k - 1, t, knots);
  if (b > 0) out += (knots[static_cast<std::size_t>(i + k + 1)] - t) / b * cox_de_boor(i + 1, k - 1, t, knots);
  return out;
}

}  // namespace cme::test
