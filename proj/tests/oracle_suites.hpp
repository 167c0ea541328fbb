#pragma once

// Property suites shared by the unit tests and the acceptance binary.

#include <string>
#include <vector>

#include "cme/horseshoe.hpp"
#include "cme/oracle.hpp"
#include "support.hpp"

namespace cme::test {

struct SpreadResult {
  std::string name;
  double spread;  // max - min over the points of log conditional - log joint
};

namespace detail {

inline double spread_of(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

// Collapsed likelihood under the oracle covariance Z Sigma0 Z^T + I.
inline double log_oracle_likelihood(const DataSet& d, const MatrixXd& sigma0, const ChainState& s) {
  double lp = 0;
  for (const auto& b : d.blocks) {
    const MatrixXd V = b.Z * sigma0 * b.Z.transpose() + MatrixXd::Identity(b.m(), b.m());
    lp += log_mvn(b.y, b.X * s.beta, s.tau2 * V);
  }
  return lp;
}

}  // namespace detail

// For each full conditional: log density of the conditional minus the log
// joint (prior x likelihood) at `points` random values of that block, all
// other blocks fixed. The spread of these differences is zero up to rounding
// iff the conditional is proportional to the joint.
inline std::vector<SpreadResult> conjugacy_suite(std::uint64_t seed, int points = 20) {
  Rng rng(seed);
  const Index n = 4, m = 3, p = 5, q = 4, k1 = 2, k2 = 3;
  const DataSet data = random_dataset(n, m, p, q, rng);
  const ProjectionPair proj = draw_projection_pair(q, k1, k2, derive_seed(seed, 1));
  const PriorConfig prior{0.5, 0.7, 1.3};
  const CmeSampler sampler(data, proj, prior);
  const ChainState s0 = random_state(p, k1, k2, n, rng);
  const WhitenedData w = sampler.whiten(s0.gamma, true, Execution::serial);

  std::vector<SpreadResult> out;
  auto gaussian_block = [&](const std::string& name, const GaussianParams& gp, auto set, auto joint) {
    std::vector<double> diffs;
    for (int k = 0; k < points; ++k) {
      ChainState s = s0;
      const VectorXd x = gp.mean + rng.normal_vector(gp.mean.size());
      set(s, x);
      diffs.push_back(log_mvn(x, gp.mean, gp.cov) - joint(s));
    }
    out.push_back({name, detail::spread_of(diffs)});
  };
  auto ig_block = [&](const std::string& name, const InvGammaParams& ig, auto set, auto joint) {
    std::vector<double> diffs;
    for (int k = 0; k < points; ++k) {
      ChainState s = s0;
      const double x = rng.uniform(0.05, 5.0);
      set(s, x);
      diffs.push_back(log_inv_gamma(x, ig.shape, ig.scale) - joint(s));
    }
    out.push_back({name, detail::spread_of(diffs)});
  };

  auto with_d = [&](const ChainState& s) { return log_joint_with_d(data, proj, prior, s); };
  auto shrink = [&](const ChainState& s) { return log_shrinkage_prior(s, prior); };
  auto collapsed = [&](const ChainState& s) {
    return log_collapsed_likelihood(data, proj, s) + log_shrinkage_prior(s, prior);
  };

  gaussian_block("d_i", sampler.d_conditional(s0, 1), [](ChainState& s, const VectorXd& x) { s.d[1] = x; }, with_d);
  gaussian_block("gamma", sampler.gamma_conditional(s0), [](ChainState& s, const VectorXd& x) { s.gamma = x; },
                 with_d);
  ig_block("delta2", horseshoe::delta2_conditional(s0), [](ChainState& s, double x) { s.delta2 = x; }, shrink);
  ig_block("xi", horseshoe::xi_conditional(s0), [](ChainState& s, double x) { s.xi = x; }, shrink);
  ig_block("lambda2_j", horseshoe::lambda2_conditional(s0, 2), [](ChainState& s, double x) { s.lambda2(2) = x; },
           shrink);
  ig_block("nu_j", horseshoe::nu_conditional(s0, 3), [](ChainState& s, double x) { s.nu(3) = x; }, shrink);
  ig_block("tau2", horseshoe::tau2_conditional(s0, w, prior), [](ChainState& s, double x) { s.tau2 = x; },
           collapsed);
  gaussian_block("beta", horseshoe::beta_conditional(s0, w),
                 [](ChainState& s, const VectorXd& x) { s.beta = x; }, collapsed);

  // The same Horseshoe block behind the oracle whitening.
  const MatrixXd A = rng.normal_matrix(q, 2);
  const MatrixXd sigma0 = A * A.transpose();
  const OracleWhitener ow(data, sigma0);
  auto oracle_joint = [&](const ChainState& s) {
    return detail::log_oracle_likelihood(data, sigma0, s) + log_shrinkage_prior(s, prior);
  };
  ig_block("tau2 (oracle)", horseshoe::tau2_conditional(s0, ow.whitened(), prior),
           [](ChainState& s, double x) { s.tau2 = x; }, oracle_joint);
  gaussian_block("beta (oracle)", horseshoe::beta_conditional(s0, ow.whitened()),
                 [](ChainState& s, const VectorXd& x) { s.beta = x; }, oracle_joint);
  return out;
}

struct FuzzResult {
  double woodbury = 0;      // max-abs error over all basis vectors
  double inverse_sqrt = 0;  // max-abs |W C W^T - I|
  double kron = 0;          // max-abs relative error of block * gamma
};

inline FuzzResult linalg_fuzz(std::uint64_t seed, int cases = 200) {
  Rng rng(seed);
  FuzzResult r;
  auto dim = [&](int hi) { return 1 + static_cast<Index>(rng.uniform(0, hi)); };
  for (int c = 0; c < cases; ++c) {
    const Index m = std::min<Index>(dim(8), 8);
    const Index k = std::min<Index>(dim(4), 4);
    const LowRankFactor f{rng.normal_matrix(m, k)};
    const MatrixXd C = f.M * f.M.transpose() + MatrixXd::Identity(m, m);
    const MatrixXd Ci = C.inverse();
    for (Index j = 0; j < m; ++j)
      r.woodbury = std::max(r.woodbury, (woodbury_inverse_apply(f, VectorXd::Unit(m, j)) - Ci.col(j)).cwiseAbs().maxCoeff());
    const MatrixXd W = inverse_sqrt_apply(f, MatrixXd::Identity(m, m));
    r.inverse_sqrt = std::max(r.inverse_sqrt, (W * C * W.transpose() - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff());

    const Index q = std::min<Index>(dim(6), 6), k1 = std::min<Index>(dim(4), 4), k2 = std::min<Index>(dim(4), 4);
    const MatrixXd Z = rng.normal_matrix(m, q), S = rng.normal_matrix(k1, q);
    const VectorXd d = rng.normal_vector(k2), g = rng.normal_vector(k1 * k2);
    const VectorXd direct = Z * S.transpose() * gamma_matrix(g, k1, k2) * d;
    r.kron = std::max(r.kron, (kron_row_block(Z, S, d) * g - direct).cwiseAbs().maxCoeff() /
                                  (1.0 + direct.cwiseAbs().maxCoeff()));
  }
  return r;
}

}  // namespace cme::test
