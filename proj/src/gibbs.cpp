#include "cme/gibbs.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cme/errors.hpp"
#include "cme/linalg.hpp"

namespace cme {

namespace {

void notify(const UpdateObserver& obs, Update u) {
  if (obs) obs(u);
}

ChainState initial_state(Index p, Index n, Index k1, Index k2, double sigma2_gamma, Rng& rng) {
  ChainState s;
  s.beta = VectorXd::Zero(p);
  s.tau2 = 1.0;
  s.gamma = std::sqrt(sigma2_gamma) * rng.normal_vector(k1 * k2);
  s.lambda2 = VectorXd::Ones(p);
  s.delta2 = 1.0;
  s.nu = VectorXd::Ones(p);
  s.xi = 1.0;
  s.d.assign(static_cast<std::size_t>(n), VectorXd::Zero(k2));
  return s;
}

}  // namespace

CmeSampler::CmeSampler(DataSet data, ProjectionPair proj, PriorConfig prior)
    : data_(std::move(data)), proj_(std::move(proj)), prior_(prior) {
  validate_dataset(data_);
  prior_.validate();
  if (proj_.q() != data_.q) throw ConfigError("projection pair was drawn for a different q");

  offsets_ = data_.row_offsets();
  y_ = data_.stacked_y();
  X_ = data_.stacked_X();
  xtx_ = MatrixXd::Zero(data_.p, data_.p);
  xtx_.selfadjointView<Eigen::Lower>().rankUpdate(X_.transpose());
  xtx_.triangularView<Eigen::StrictlyUpper>() = xtx_.transpose().eval();

  zst_.reserve(data_.blocks.size());
  xtzst_.reserve(data_.blocks.size());
  for (const auto& b : data_.blocks) {
    zst_.push_back(b.Z * proj_.S().transpose());
    xtzst_.push_back(b.X.transpose() * zst_.back());
  }
  solver_ = horseshoe::choose_beta_solver(data_.total_obs(), data_.p);
}

void CmeSampler::set_responses(const std::vector<VectorXd>& y) {
  if (y.size() != data_.blocks.size()) throw DataError("set_responses: subject count differs");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].size() != data_.blocks[i].m()) throw DataError("set_responses: length differs for a subject");
    data_.blocks[i].y = y[i];
    y_.segment(offsets_[i], y[i].size()) = y[i];
  }
}

ChainState CmeSampler::init_chain(Rng& rng) const {
  return initial_state(data_.p, data_.n(), proj_.k1(), proj_.k2(), prior_.sigma2_gamma, rng);
}

GaussianParams CmeSampler::d_conditional(const ChainState& s, Index subject) const {
  const auto& b = data_.blocks.at(static_cast<std::size_t>(subject));
  const MatrixXd& lr = proj_.r_gram_factor();
  const MatrixXd gl = gamma_as_matrix(s.gamma, proj_.k1(), proj_.k2()) * lr;
  const LowRankFactor f = low_rank_factor_projected(zst_[static_cast<std::size_t>(subject)], gl);

  // Cov(y_i, d_i) = tau2 M L_R^T and Var(d_i) = tau2 L_R L_R^T, so conditioning gives
  //   mean = L_R M^T C^{-1} r,  cov = tau2 L_R (I + M^T M)^{-1} L_R^T.
  const VectorXd resid = b.y - b.X * s.beta;
  GaussianParams out;
  out.mean = lr * (f.M.transpose() * woodbury_inverse_apply(f, resid));
  MatrixXd inner = MatrixXd::Identity(f.k2(), f.k2()) + f.M.transpose() * f.M;
  const MatrixXd inner_inv = inner.llt().solve(MatrixXd::Identity(f.k2(), f.k2()));
  out.cov = s.tau2 * lr * inner_inv * lr.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

void CmeSampler::sample_d(ChainState& s, Rng& rng) const {
  for (Index i = 0; i < data_.n(); ++i) {
    const GaussianParams g = d_conditional(s, i);
    s.d[static_cast<std::size_t>(i)] = mvn_sample(g.mean, g.cov, rng);
  }
}

MatrixXd CmeSampler::z_check(const ChainState& s) const {
  const Index k = proj_.k1() * proj_.k2();
  MatrixXd zc(data_.total_obs(), k);
  for (std::size_t i = 0; i < data_.blocks.size(); ++i)
    zc.middleRows(offsets_[i], data_.blocks[i].m()) = kron_row_block_projected(zst_[i], s.d[i]);
  return zc;
}

GaussianParams CmeSampler::gamma_conditional(const ChainState& s) const {
  const MatrixXd zc = z_check(s);
  const Index k = zc.cols();
  MatrixXd precision = zc.transpose() * zc / s.tau2;
  precision.diagonal().array() += 1.0 / prior_.sigma2_gamma;
  const MatrixXd cov = precision.llt().solve(MatrixXd::Identity(k, k));
  return {cov * (zc.transpose() * (y_ - X_ * s.beta)) / s.tau2, cov};
}

void CmeSampler::sample_gamma(ChainState& s, Rng& rng) const {
  const MatrixXd zc = z_check(s);
  const Index k = zc.cols();
  // Precision scaled by tau2: (Zc^T Zc + tau2/sigma2 I) gamma = Zc^T r, covariance tau2 * inverse.
  MatrixXd q = MatrixXd::Zero(k, k);
  q.selfadjointView<Eigen::Lower>().rankUpdate(zc.transpose());
  q.triangularView<Eigen::StrictlyUpper>() = q.transpose().eval();
  q.diagonal().array() += s.tau2 / prior_.sigma2_gamma;
  const VectorXd rhs = zc.transpose() * (y_ - X_ * s.beta);
  s.gamma = gaussian_from_precision(q, rhs, std::sqrt(s.tau2), rng, "gamma precision");
}

WhitenedData CmeSampler::whiten(const VectorXd& gamma) const {
  return whiten(gamma, solver_ == horseshoe::BetaSolver::precision);
}

WhitenedData CmeSampler::whiten(const VectorXd& gamma, bool with_gram, Execution exec) const {
  const Index p = data_.p;
  const Index k2 = proj_.k2();
  const Index n = data_.n();
  const MatrixXd gl = gamma_as_matrix(gamma, proj_.k1(), k2) * proj_.r_gram_factor();

  WhitenedData w;
  w.y_star.resize(data_.total_obs());
  w.X_star.resize(data_.total_obs(), p);
  MatrixXd q_all;
  if (with_gram) q_all.resize(p, n * k2);

  auto one_subject = [&](Index i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& b = data_.blocks[idx];
    const LowRankFactor f = low_rank_factor_projected(zst_[idx], gl);
    const InverseSqrt W(f);
    w.y_star.segment(offsets_[idx], b.m()) = W.apply(b.y);
    w.X_star.middleRows(offsets_[idx], b.m()) = W.apply(b.X);
    if (with_gram) {
      // X_i^T C_i^{-1} X_i = X_i^T X_i - Q_i Q_i^T with Q_i = X_i^T M L^{-T}, L L^T = I + M^T M.
      MatrixXd inner = MatrixXd::Identity(k2, k2) + f.M.transpose() * f.M;
      const Eigen::LLT<MatrixXd> llt(inner);
      const MatrixXd xtm = xtzst_[idx] * gl;
      q_all.middleCols(i * k2, k2) = llt.matrixL().solve(xtm.transpose()).transpose();
    }
  };

  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) one_subject(i);
  } else {
    for (Index i = 0; i < n; ++i) one_subject(i);
  }

  if (with_gram) {
    w.gram = xtx_;
    w.gram.selfadjointView<Eigen::Lower>().rankUpdate(q_all, -1.0);
    w.gram.triangularView<Eigen::StrictlyUpper>() = w.gram.transpose().eval();
  }
  if (!w.X_star.allFinite() || !w.y_star.allFinite()) throw NumericError("whitened data is not finite");
  return w;
}

void CmeSampler::step(ChainState& s, Rng& rng, const UpdateObserver& obs) const {
  sample_d(s, rng);
  notify(obs, Update::d);
  sample_gamma(s, rng);
  notify(obs, Update::gamma);
  const WhitenedData w = whiten(s.gamma);
  horseshoe::step(s, w, prior_, rng, obs);
}

PosteriorDraws CmeSampler::run(const FitConfig& cfg, Rng& rng, const ProgressSink& progress) const {
  cfg.validate_for(data_.q);
  if (cfg.k1 != proj_.k1() || cfg.k2 != proj_.k2())
    throw ConfigError("fit config k1/k2 do not match the projection pair");
  ChainState state = init_chain(rng);
  return drive_chain(state, cfg, [&](ChainState& s) { step(s, rng); }, progress);
}

PosteriorDraws drive_chain(ChainState& state, const FitConfig& cfg, const std::function<void(ChainState&)>& sweep,
                           const ProgressSink& progress) {
  cfg.validate();
  const Index keep = cfg.kept_draws();
  PosteriorDraws draws;
  draws.beta.resize(keep, state.beta.size());
  draws.tau2.resize(keep);
  draws.gamma.resize(keep, state.gamma.size());
  draws.meta = {cfg.iterations, cfg.burn_in, cfg.thin, cfg.seed};

  Index row = 0;
  for (Index t = 1; t <= cfg.iterations; ++t) {
    try {
      sweep(state);
    } catch (const NumericError& e) {
      throw ChainError("iteration " + std::to_string(t) + ": " + e.what(), static_cast<long>(t - 1));
    }
    if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 && row < keep) {
      draws.beta.row(row) = state.beta.transpose();
      draws.tau2(row) = state.tau2;
      draws.gamma.row(row) = state.gamma.transpose();
      ++row;
    }
    if (progress && (t % 100 == 0 || t == cfg.iterations)) progress({t, cfg.iterations});
  }
  return draws;
}

ChainState init_chain(const DataSet& d, const FitConfig& cfg, Rng& rng) {
  cfg.validate_for(d.q);
  validate_dataset(d);
  return initial_state(d.p, d.n(), cfg.k1, cfg.k2, cfg.prior.sigma2_gamma, rng);
}

PosteriorDraws run_chain(const DataSet& d, const FitConfig& cfg, const ProjectionPair& proj, Rng& rng,
                         const ProgressSink& progress) {
  const CmeSampler sampler(d, proj, cfg.prior);
  return sampler.run(cfg, rng, progress);
}

WhitenedData whiten_reference(const DataSet& data, const ProjectionPair& proj, const VectorXd& gamma) {
  const MatrixXd G = gamma_as_matrix(gamma, proj.k1(), proj.k2());
  const MatrixXd proxy = proj.S().transpose() * G * proj.R();  // q x q
  WhitenedData w;
  w.y_star.resize(data.total_obs());
  w.X_star.resize(data.total_obs(), data.p);
  Index row = 0;
  for (const auto& b : data.blocks) {
    const MatrixXd zp = b.Z * proxy;
    MatrixXd C = zp * zp.transpose();
    C.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    const MatrixXd W =
        es.eigenvectors() * es.eigenvalues().array().rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
    w.y_star.segment(row, b.m()) = W * b.y;
    w.X_star.middleRows(row, b.m()) = W * b.X;
    row += b.m();
  }
  w.gram = w.X_star.transpose() * w.X_star;
  return w;
}

MatrixXd posterior_predict(const PosteriorDraws& draws, const DataSet& test, const ProjectionPair& proj,
                           Rng& rng) {
  validate_dataset(test, {.require_response = false});
  if (test.p != draws.beta.cols()) throw DataError("test design has p different from the fitted draws");
  if (test.q != proj.q()) throw DataError("test design has q different from the projection pair");
  if (draws.gamma.cols() != proj.k1() * proj.k2()) throw DataError("gamma draws do not match k1*k2");

  std::vector<MatrixXd> zst;
  zst.reserve(test.blocks.size());
  for (const auto& b : test.blocks) zst.push_back(b.Z * proj.S().transpose());
  const auto offsets = test.row_offsets();

  MatrixXd out(draws.kept(), test.total_obs());
  for (Index t = 0; t < draws.kept(); ++t) {
    const VectorXd beta = draws.beta.row(t).transpose();
    const VectorXd gamma = draws.gamma.row(t).transpose();
    const double tau = std::sqrt(draws.tau2(t));
    const MatrixXd gl = gamma_as_matrix(gamma, proj.k1(), proj.k2()) * proj.r_gram_factor();
    for (std::size_t i = 0; i < test.blocks.size(); ++i) {
      const auto& b = test.blocks[i];
      const MatrixXd M = zst[i] * gl;
      const VectorXd u = rng.normal_vector(M.cols());
      const VectorXd e = rng.normal_vector(b.m());
      out.row(t).segment(offsets[i], b.m()) = (b.X * beta + tau * (M * u + e)).transpose();
    }
  }
  return out;
}

VectorXd point_prediction(const MatrixXd& predictive_draws) {
  if (predictive_draws.rows() == 0) throw DataError("point_prediction: no draws");
  return predictive_draws.colwise().mean().transpose();
}

}  // namespace cme
