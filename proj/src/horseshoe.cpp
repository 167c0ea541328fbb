#include "cme/horseshoe.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "cme/errors.hpp"
#include "cme/linalg.hpp"

namespace cme::horseshoe {

namespace {

void notify(const UpdateObserver& obs, Update u) {
  if (obs) obs(u);
}

double draw_inv_gamma(Rng& rng, const InvGammaParams& ig, const char* what) {
  const double v = rng.inv_gamma(ig.shape, ig.scale);
  if (!std::isfinite(v) || v <= 0)
    throw NumericError(std::string("inverse-gamma draw for ") + what + " is not a positive finite number");
  return v;
}

}  // namespace

InvGammaParams delta2_conditional(const ChainState& s) {
  const double p = static_cast<double>(s.beta.size());
  const double quad = (s.beta.array().square() / s.lambda2.array()).sum();
  return {(p + 1.0) / 2.0, 1.0 / s.xi + quad / (2.0 * s.tau2)};
}

InvGammaParams xi_conditional(const ChainState& s) { return {1.0, 1.0 + 1.0 / s.delta2}; }

InvGammaParams lambda2_conditional(const ChainState& s, Index j) {
  return {1.0, 1.0 / s.nu(j) + s.beta(j) * s.beta(j) / (2.0 * s.delta2 * s.tau2)};
}

InvGammaParams nu_conditional(const ChainState& s, Index j) { return {1.0, 1.0 + 1.0 / s.lambda2(j)}; }

void sample_aux(ChainState& s, Rng& rng, const UpdateObserver& obs) {
  s.delta2 = draw_inv_gamma(rng, delta2_conditional(s), "delta2");
  notify(obs, Update::delta2);
  s.xi = draw_inv_gamma(rng, xi_conditional(s), "xi");
  notify(obs, Update::xi);
  for (Index j = 0; j < s.beta.size(); ++j) s.lambda2(j) = draw_inv_gamma(rng, lambda2_conditional(s, j), "lambda2");
  notify(obs, Update::lambda2);
  for (Index j = 0; j < s.beta.size(); ++j) s.nu(j) = draw_inv_gamma(rng, nu_conditional(s, j), "nu");
  notify(obs, Update::nu);
}

InvGammaParams tau2_conditional(const ChainState& s, const WhitenedData& w, const PriorConfig& prior) {
  const double n = static_cast<double>(w.n_obs());
  const double p = static_cast<double>(s.beta.size());
  const double rss = (w.y_star - w.X_star * s.beta).squaredNorm();
  const double penalty = (s.beta.array().square() / (s.delta2 * s.lambda2.array())).sum();
  return {prior.a0 + (n + p) / 2.0, prior.b0 + rss / 2.0 + penalty / 2.0};
}

void sample_tau2(ChainState& s, const WhitenedData& w, const PriorConfig& prior, Rng& rng) {
  s.tau2 = draw_inv_gamma(rng, tau2_conditional(s, w, prior), "tau2");
}

BetaSolver choose_beta_solver(Index n_obs, Index p) {
  const double n = static_cast<double>(n_obs);
  const double q = static_cast<double>(p);
  const double dual = n * n * q + n * n * n / 3.0;
  const double precision = q * q * q / 3.0 + n * q * q / 2.0;
  return dual < precision ? BetaSolver::dual : BetaSolver::precision;
}

GaussianParams beta_conditional(const ChainState& s, const WhitenedData& w) {
  MatrixXd Q = w.X_star.transpose() * w.X_star;
  Q.diagonal().array() += 1.0 / (s.delta2 * s.lambda2.array());
  const MatrixXd A = Q.llt().solve(MatrixXd::Identity(Q.rows(), Q.cols()));
  return {A * (w.X_star.transpose() * w.y_star), s.tau2 * A};
}

void sample_beta(ChainState& s, const WhitenedData& w, Rng& rng, BetaSolver solver) {
  const Index p = s.beta.size();
  const double tau = std::sqrt(s.tau2);
  const VectorXd prior_var = s.delta2 * s.lambda2.array();

  if (solver == BetaSolver::precision) {
    MatrixXd Q = w.gram.size() > 0 ? w.gram : MatrixXd(w.X_star.transpose() * w.X_star);
    Q.diagonal().array() += prior_var.array().inverse();
    const VectorXd b = w.X_star.transpose() * w.y_star;
    s.beta = gaussian_from_precision(Q, b, tau, rng, "beta precision");
    return;
  }

  // Exact structured-Gaussian draw through an N x N system: with D = tau2 delta2 Lambda,
  // u ~ N(0, D), v = X* u / tau + e, solve (X* delta2 Lambda X*^T + I) z = y*/tau - v,
  // beta = u + tau delta2 Lambda X*^T z.
  const VectorXd u = (tau * prior_var.array().sqrt()).matrix().cwiseProduct(rng.normal_vector(p));
  const VectorXd e = rng.normal_vector(w.n_obs());
  const MatrixXd scaled = w.X_star * prior_var.cwiseSqrt().asDiagonal();
  MatrixXd H = MatrixXd::Identity(w.n_obs(), w.n_obs());
  H.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  const VectorXd rhs = (w.y_star - w.X_star * u) / tau - e;
  const MatrixXd L = jittered_cholesky(H, "beta dual system");
  const auto tri = L.triangularView<Eigen::Lower>();
  VectorXd z = tri.solve(rhs);
  tri.transpose().solveInPlace(z);
  s.beta = u + tau * prior_var.cwiseProduct(w.X_star.transpose() * z);
}

void sample_beta(ChainState& s, const WhitenedData& w, Rng& rng) {
  sample_beta(s, w, rng, choose_beta_solver(w.n_obs(), w.p()));
}

void step(ChainState& s, const WhitenedData& w, const PriorConfig& prior, Rng& rng, const UpdateObserver& obs) {
  sample_aux(s, rng, obs);
  sample_tau2(s, w, prior, rng);
  notify(obs, Update::tau2);
  sample_beta(s, w, rng);
  notify(obs, Update::beta);
  if (!s.beta.allFinite()) throw NumericError("beta draw is not finite");
}

}  // namespace cme::horseshoe
