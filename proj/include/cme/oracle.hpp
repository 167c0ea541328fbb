#pragma once

// OracleHS baseline: the Horseshoe block run on data whitened with the true
// marginal covariance V_0i = Z_i Sigma0 Z_i^T + I.

#include <vector>

#include "cme/gibbs.hpp"
#include "cme/horseshoe.hpp"
#include "cme/model.hpp"

namespace cme {

class OracleWhitener {
 public:
  OracleWhitener(const DataSet& data, const MatrixXd& sigma0);

  const WhitenedData& whitened() const { return whitened_; }
  // Symmetric V_0i^{-1/2} for subject i.
  const MatrixXd& inverse_sqrt(Index subject) const { return inv_sqrt_[static_cast<std::size_t>(subject)]; }

 private:
  std::vector<MatrixXd> inv_sqrt_;
  WhitenedData whitened_;
};

// q x r factor L with L L^T = Sigma0 (negative eigenvalues clipped at zero).
MatrixXd psd_factor(const MatrixXd& sigma0);

PosteriorDraws fit_oracle_hs(const DataSet& d, const TruthSpec& truth, const FitConfig& cfg, Rng& rng,
                             const ProgressSink& progress = {});

// Per stored iteration: N(X* beta_t, tau2_t (Z* Sigma0 Z*^T + I)), independently per subject.
MatrixXd oracle_posterior_predict(const PosteriorDraws& draws, const DataSet& test, const TruthSpec& truth,
                                  Rng& rng);

}  // namespace cme
