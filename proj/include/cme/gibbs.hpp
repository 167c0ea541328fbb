#pragma once

// Collapsed Gibbs sampler for the compressed mixed-effects model.
//
// One sweep:
//   1. d_i | y_i, beta, tau2, gamma           for every subject
//   2. gamma | d, beta, tau2                  Gaussian regression on Z-check
//   3. whiten with C_i^{-1/2} from the new gamma, then the Horseshoe block
//      (delta2, xi, lambda2, nu, tau2, beta) with the d_i integrated out.

#include <functional>
#include <vector>

#include "cme/horseshoe.hpp"
#include "cme/model.hpp"
#include "cme/rng.hpp"

namespace cme {

enum class Execution { serial, parallel };

struct ChainProgress {
  Index iteration;
  Index total;
};
// Called every 100 iterations and once at the end.
using ProgressSink = std::function<void(const ChainProgress&)>;

class CmeSampler {
 public:
  CmeSampler(DataSet data, ProjectionPair proj, PriorConfig prior);

  const DataSet& data() const { return data_; }
  const ProjectionPair& projection() const { return proj_; }
  const PriorConfig& prior() const { return prior_; }

  // Replaces every y_i (same lengths); the design-dependent caches stay valid.
  void set_responses(const std::vector<VectorXd>& y);

  // beta = 0, tau2 = 1, shrinkage scales = 1, d_i = 0, gamma from its prior.
  ChainState init_chain(Rng& rng) const;

  GaussianParams d_conditional(const ChainState& s, Index subject) const;
  void sample_d(ChainState& s, Rng& rng) const;

  // Stacked N x (k1 k2) design of the gamma regression for the current d_i.
  MatrixXd z_check(const ChainState& s) const;
  GaussianParams gamma_conditional(const ChainState& s) const;
  void sample_gamma(ChainState& s, Rng& rng) const;

  // Low-rank whitening. The Gram matrix X*^T X* is assembled by a rank update
  // of the cached X^T X when `with_gram` is set.
  WhitenedData whiten(const VectorXd& gamma, bool with_gram, Execution exec = Execution::parallel) const;
  WhitenedData whiten(const VectorXd& gamma) const;

  void step(ChainState& s, Rng& rng, const UpdateObserver& obs = {}) const;

  PosteriorDraws run(const FitConfig& cfg, Rng& rng, const ProgressSink& progress = {}) const;

 private:
  DataSet data_;
  ProjectionPair proj_;
  PriorConfig prior_;
  std::vector<Index> offsets_;
  std::vector<MatrixXd> zst_;    // Z_i S^T
  std::vector<MatrixXd> xtzst_;  // X_i^T Z_i S^T
  MatrixXd xtx_;
  VectorXd y_;
  MatrixXd X_;
  horseshoe::BetaSolver solver_;
};

// Dense reference for `CmeSampler::whiten`: forms each C_i, takes its symmetric
// inverse square root by eigendecomposition, and multiplies through.
WhitenedData whiten_reference(const DataSet& data, const ProjectionPair& proj, const VectorXd& gamma);

ChainState init_chain(const DataSet& d, const FitConfig& cfg, Rng& rng);

// Runs cfg.iterations sweeps and keeps post burn-in, thinned draws.
PosteriorDraws run_chain(const DataSet& d, const FitConfig& cfg, const ProjectionPair& proj, Rng& rng,
                         const ProgressSink& progress = {});

// Shared driver: calls `sweep` cfg.iterations times and records draws. Numeric
// failures are rethrown as ChainError carrying the last completed iteration.
PosteriorDraws drive_chain(ChainState& state, const FitConfig& cfg, const std::function<void(ChainState&)>& sweep,
                           const ProgressSink& progress);

// One predictive draw per stored iteration for every row of the test design:
// X* beta_t + tau_t (M_t u + w), u ~ N(0, I_k2), w ~ N(0, I_m), per subject.
MatrixXd posterior_predict(const PosteriorDraws& draws, const DataSet& test, const ProjectionPair& proj,
                           Rng& rng);

// Column means of a predictive draw matrix.
VectorXd point_prediction(const MatrixXd& predictive_draws);

}  // namespace cme
