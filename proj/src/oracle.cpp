#include "cme/oracle.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "cme/errors.hpp"

namespace cme {

OracleWhitener::OracleWhitener(const DataSet& data, const MatrixXd& sigma0) {
  validate_dataset(data);
  if (sigma0.rows() != data.q || sigma0.cols() != data.q) throw DataError("Sigma0 must be q x q");

  whitened_.y_star.resize(data.total_obs());
  whitened_.X_star.resize(data.total_obs(), data.p);
  inv_sqrt_.reserve(data.blocks.size());
  Index row = 0;
  for (const auto& b : data.blocks) {
    // Z Sigma0 Z^T has rank <= q; its eigenvalues e give V^{-1/2} = V diag(1/sqrt(1+e)) V^T.
    const MatrixXd zsz = b.Z * sigma0 * b.Z.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (zsz + zsz.transpose()));
    if (es.info() != Eigen::Success) throw NumericError("oracle whitening: eigendecomposition failed");
    const VectorXd scale = (1.0 + es.eigenvalues().array().max(0.0)).rsqrt();
    MatrixXd W = es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
    whitened_.y_star.segment(row, b.m()) = W * b.y;
    whitened_.X_star.middleRows(row, b.m()) = W * b.X;
    inv_sqrt_.push_back(std::move(W));
    row += b.m();
  }
  whitened_.gram = whitened_.X_star.transpose() * whitened_.X_star;
}

MatrixXd psd_factor(const MatrixXd& sigma0) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma0 + sigma0.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("Sigma0 eigendecomposition failed");
  return es.eigenvectors() * es.eigenvalues().array().max(0.0).sqrt().matrix().asDiagonal();
}

PosteriorDraws fit_oracle_hs(const DataSet& d, const TruthSpec& truth, const FitConfig& cfg, Rng& rng,
                             const ProgressSink& progress) {
  cfg.validate();
  truth.validate();
  const OracleWhitener whitener(d, truth.Sigma0);
  const WhitenedData& w = whitener.whitened();

  ChainState state;
  state.beta = VectorXd::Zero(d.p);
  state.tau2 = 1.0;
  state.lambda2 = VectorXd::Ones(d.p);
  state.delta2 = 1.0;
  state.nu = VectorXd::Ones(d.p);
  state.xi = 1.0;
  state.gamma.resize(0);

  return drive_chain(state, cfg, [&](ChainState& s) { horseshoe::step(s, w, cfg.prior, rng); }, progress);
}

MatrixXd oracle_posterior_predict(const PosteriorDraws& draws, const DataSet& test, const TruthSpec& truth,
                                  Rng& rng) {
  validate_dataset(test, {.require_response = false});
  if (test.p != draws.beta.cols()) throw DataError("test design has p different from the fitted draws");
  if (truth.Sigma0.rows() != test.q) throw DataError("Sigma0 does not match the test design q");

  const MatrixXd L = psd_factor(truth.Sigma0);
  std::vector<MatrixXd> zl;
  zl.reserve(test.blocks.size());
  for (const auto& b : test.blocks) zl.push_back(b.Z * L);
  const auto offsets = test.row_offsets();

  MatrixXd out(draws.kept(), test.total_obs());
  for (Index t = 0; t < draws.kept(); ++t) {
    const VectorXd beta = draws.beta.row(t).transpose();
    const double tau = std::sqrt(draws.tau2(t));
    for (std::size_t i = 0; i < test.blocks.size(); ++i) {
      const auto& b = test.blocks[i];
      const VectorXd u = rng.normal_vector(zl[i].cols());
      const VectorXd e = rng.normal_vector(b.m());
      out.row(t).segment(offsets[i], b.m()) = (b.X * beta + tau * (zl[i] * u + e)).transpose();
    }
  }
  return out;
}

}  // namespace cme
