#pragma once

// Horseshoe regression block on whitened data: updates delta2, xi, lambda2, nu,
// tau2 and beta, in that order. Shared verbatim by the compressed sampler and
// the oracle sampler; only the whitening differs.

#include <functional>

#include <Eigen/Core>

#include "cme/model.hpp"
#include "cme/rng.hpp"

namespace cme {

// Homoscedastic regression y* = X* beta + eps*, eps* ~ N(0, tau2 I).
struct WhitenedData {
  VectorXd y_star;  // N
  MatrixXd X_star;  // N x p
  // X*^T X*, filled only when the p x p solver will use it (otherwise 0 x 0).
  MatrixXd gram;

  Index n_obs() const { return X_star.rows(); }
  Index p() const { return X_star.cols(); }
};

struct InvGammaParams {
  double shape;
  double scale;
};

struct GaussianParams {
  VectorXd mean;
  MatrixXd cov;
};

// Sampler updates, in the order one sweep performs them.
enum class Update { d, gamma, delta2, xi, lambda2, nu, tau2, beta };
using UpdateObserver = std::function<void(Update)>;

namespace horseshoe {

InvGammaParams delta2_conditional(const ChainState& s);
InvGammaParams xi_conditional(const ChainState& s);
InvGammaParams lambda2_conditional(const ChainState& s, Index j);
InvGammaParams nu_conditional(const ChainState& s, Index j);

// delta2, xi, lambda2_j, nu_j using the current beta and tau2.
void sample_aux(ChainState& s, Rng& rng, const UpdateObserver& obs = {});

InvGammaParams tau2_conditional(const ChainState& s, const WhitenedData& w, const PriorConfig& prior);
void sample_tau2(ChainState& s, const WhitenedData& w, const PriorConfig& prior, Rng& rng);

// p x p Cholesky of X*^T X* + (delta2 Lambda)^{-1}, or the N x N dual system
// (X* delta2 Lambda X*^T + I) when that is cheaper.
enum class BetaSolver { precision, dual };

// Picks the solver with the lower flop count. When p <= N this is always `precision`.
BetaSolver choose_beta_solver(Index n_obs, Index p);

// Dense mean A X*^T y* and covariance tau2 A, A = (X*^T X* + (delta2 Lambda)^{-1})^{-1}.
GaussianParams beta_conditional(const ChainState& s, const WhitenedData& w);

void sample_beta(ChainState& s, const WhitenedData& w, Rng& rng);
void sample_beta(ChainState& s, const WhitenedData& w, Rng& rng, BetaSolver solver);

// One pass of the whole block.
void step(ChainState& s, const WhitenedData& w, const PriorConfig& prior, Rng& rng,
          const UpdateObserver& obs = {});

}  // namespace horseshoe
}  // namespace cme
