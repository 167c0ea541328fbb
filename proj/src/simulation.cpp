#include "cme/simulation.hpp"

#include <cmath>
#include <mutex>

#include <Eigen/Cholesky>

#include "cme/errors.hpp"
#include "cme/linalg.hpp"
#include "cme/oracle.hpp"
#include "cme/selection.hpp"

namespace cme {

std::string_view to_string(XDesign x) { return x == XDesign::independent ? "independent" : "toeplitz"; }

XDesign parse_x_design(std::string_view s) {
  if (s == "independent") return XDesign::independent;
  if (s == "toeplitz") return XDesign::toeplitz;
  throw ConfigError("unknown x design '" + std::string(s) + "' (expected independent or toeplitz)");
}

void SimScenario::validate() const {
  if (p < 1 || q < 1 || n < 1 || m < 1 || test_subjects < 1 || replications < 1)
    throw ConfigError("scenario dimensions and counts must be positive");
  if (k1 < 1 || k2 < 1 || k1 > q || k2 > q) throw ConfigError("scenario requires 1 <= k1, k2 <= q");
  if (sigma == SigmaStructure::block_diagonal && q != 14)
    throw ConfigError("block-diagonal Sigma is defined for q = 14 only");
  if (!(tau0_sq > 0)) throw ConfigError("tau0_sq must be positive");
  fit_config(0).validate();
}

FitConfig SimScenario::fit_config(std::uint64_t chain_seed) const {
  FitConfig cfg;
  cfg.k1 = k1;
  cfg.k2 = k2;
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  cfg.thin = thin;
  cfg.seed = chain_seed;
  cfg.prior = prior;
  cfg.s2m_tol = s2m_tol;
  return cfg;
}

std::vector<SimScenario> scenario_grid(const SimScenario& base, bool k_grid) {
  std::vector<SimScenario> out;
  const std::vector<Index> ks = k_grid ? std::vector<Index>{3, 7, 14} : std::vector<Index>{base.k1};
  const std::vector<Index> k2s = k_grid ? std::vector<Index>{3, 7, 14} : std::vector<Index>{base.k2};
  for (auto sigma : {SigmaStructure::diagonal, SigmaStructure::block_diagonal, SigmaStructure::toeplitz})
    for (Index m : {4, 8, 12})
      for (Index k1 : ks)
        for (Index k2 : k2s) {
          SimScenario s = base;
          s.sigma = sigma;
          s.m = m;
          s.k1 = k1;
          s.k2 = k2;
          out.push_back(s);
        }
  return out;
}

MatrixXd gen_sigma(SigmaStructure label, Index q, Rng& rng) {
  MatrixXd sigma = MatrixXd::Zero(q, q);
  switch (label) {
    case SigmaStructure::diagonal: {
      const Index half = (q + 1) / 2;
      for (Index i = 0; i < half; ++i) sigma(i, i) = 0.5;
      break;
    }
    case SigmaStructure::block_diagonal: {
      if (q != 14) throw ConfigError("block-diagonal Sigma is defined for q = 14 only");
      MatrixXd L = MatrixXd::Zero(q, 3);
      const Index starts[] = {0, 5, 10};
      const Index ends[] = {5, 10, 14};
      for (Index c = 0; c < 3; ++c)
        for (Index r = starts[c]; r < ends[c]; ++r) L(r, c) = rng.uniform(0.0, 3.0);
      sigma = L * L.transpose();
      break;
    }
    case SigmaStructure::toeplitz:
      for (Index i = 0; i < q; ++i)
        for (Index j = 0; j < q; ++j) sigma(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
      break;
  }
  return sigma;
}

VectorXd true_beta(Index p) {
  VectorXd beta = VectorXd::Zero(p);
  const double lead[] = {1.0, 0.5, 0.2, 0.1, 0.05};
  for (Index j = 0; j < std::min<Index>(p, 5); ++j) beta(j) = lead[j];
  return beta;
}

namespace {

DataSet gen_subjects(const SimScenario& s, Index count, std::uint64_t base_seed, const VectorXd& beta0,
                     const MatrixXd& sigma_factor, const MatrixXd* x_chol, const std::string& prefix) {
  DataSet d;
  d.p = s.p;
  d.q = s.q;
  d.blocks.reserve(static_cast<std::size_t>(count));
  const double tau0 = std::sqrt(s.tau0_sq);
  for (Index i = 0; i < count; ++i) {
    Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    SubjectBlock b;
    b.id = prefix + std::to_string(i + 1);
    b.X.resize(s.m, s.p);
    b.Z.resize(s.m, s.q);
    b.y.resize(s.m);
    const VectorXd bi = tau0 * (sigma_factor * rng.normal_vector(sigma_factor.cols()));
    for (Index j = 0; j < s.m; ++j) {
      VectorXd x = rng.normal_vector(s.p);
      if (x_chol) x = (*x_chol) * x;
      b.X.row(j) = x.transpose();
      b.Z.row(j) = rng.normal_vector(s.q).transpose();
      b.y(j) = b.X.row(j).dot(beta0) + b.Z.row(j).dot(bi) + tau0 * rng.normal();
    }
    d.blocks.push_back(std::move(b));
  }
  return d;
}

}  // namespace

SimData gen_dataset(const SimScenario& s, std::uint64_t data_seed) {
  s.validate();
  Rng sigma_rng(derive_seed(data_seed, 0));
  SimData out;
  out.truth.beta0 = true_beta(s.p);
  out.truth.Sigma0 = gen_sigma(s.sigma, s.q, sigma_rng);
  out.truth.tau0_sq = s.tau0_sq;
  out.truth.sigma_label = s.sigma;

  const MatrixXd factor = psd_factor(out.truth.Sigma0);
  MatrixXd x_chol;
  if (s.x_design == XDesign::toeplitz) {
    MatrixXd sx(s.p, s.p);
    for (Index i = 0; i < s.p; ++i)
      for (Index j = 0; j < s.p; ++j) sx(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
    x_chol = sx.llt().matrixL();
  }
  const MatrixXd* xc = s.x_design == XDesign::toeplitz ? &x_chol : nullptr;
  out.train = gen_subjects(s, s.n, derive_seed(data_seed, 1), out.truth.beta0, factor, xc, "s");
  out.test = gen_subjects(s, s.test_subjects, derive_seed(data_seed, 2), out.truth.beta0, factor, xc, "t");
  return out;
}

MethodMetrics evaluate_fit(const SimData& data, const PosteriorDraws& draws, const MatrixXd& predictive,
                           std::optional<double> s2m_tol) {
  MethodMetrics mm;
  const VectorXd& beta0 = data.truth.beta0;

  const SelectionResult sel = s2m_select(draws.beta, s2m_tol);
  const SelectionRates rates = tpr_fpr(sel.selected, beta0);
  mm.tpr = rates.tpr.value_or(std::nan(""));
  mm.fpr = rates.fpr.value_or(std::nan(""));
  mm.selected = sel.chosen_count;

  const CoverageSummary cs = coverage_and_width(credible_intervals(draws.beta), beta0, true);
  mm.signal_coverage = cs.signal_coverage.value_or(std::nan(""));
  mm.signal_width = cs.signal_width.value_or(std::nan(""));
  mm.zero_coverage = cs.zero_coverage.value_or(std::nan(""));
  mm.zero_width = cs.zero_width.value_or(std::nan(""));

  const VectorXd point = point_prediction(predictive);
  std::vector<VectorXd> truth_y, pred_y;
  const auto offsets = data.test.row_offsets();
  for (std::size_t i = 0; i < data.test.blocks.size(); ++i) {
    truth_y.push_back(data.test.blocks[i].y);
    pred_y.push_back(point.segment(offsets[i], data.test.blocks[i].m()));
  }
  mm.mspe = mspe(truth_y, pred_y);

  const CoverageSummary pc = coverage_and_width(credible_intervals(predictive), data.test.stacked_y());
  mm.pred_coverage = pc.coverage;
  mm.pred_width = pc.mean_width;

  const VectorXd beta_bar = draws.beta.colwise().mean().transpose();
  const MatrixXd X = data.train.stacked_X();
  mm.risk = (X * (beta0 - beta_bar)).squaredNorm() / static_cast<double>(X.rows());
  return mm;
}

ReplicationMetrics run_replication(const SimScenario& s, Index replication) {
  ReplicationMetrics row;
  row.sigma = s.sigma;
  row.x_design = s.x_design;
  row.m = s.m;
  row.k1 = s.k1;
  row.k2 = s.k2;
  row.replication = replication;
  row.seed = derive_seed(s.seed, static_cast<std::uint64_t>(replication));
  const SeedSet seeds = split_seed(row.seed);

  const SimData data = gen_dataset(s, seeds.data);
  const ProjectionPair proj = draw_projection_pair(s.q, s.k1, s.k2, seeds.projection);
  const FitConfig cfg = s.fit_config(seeds.chain);

  Rng chain_rng(seeds.chain);
  const PosteriorDraws draws = run_chain(data.train, cfg, proj, chain_rng);
  Rng pred_rng(derive_seed(seeds.chain, 11));
  const MatrixXd pred = posterior_predict(draws, data.test, proj, pred_rng);
  row.cme = evaluate_fit(data, draws, pred, s.s2m_tol);

  if (s.with_oracle) {
    Rng oracle_rng(derive_seed(seeds.chain, 21));
    const PosteriorDraws odraws = fit_oracle_hs(data.train, data.truth, cfg, oracle_rng);
    Rng opred_rng(derive_seed(seeds.chain, 22));
    const MatrixXd opred = oracle_posterior_predict(odraws, data.test, data.truth, opred_rng);
    row.oracle = evaluate_fit(data, odraws, opred, s.s2m_tol);
    row.rel_mspe = relative_metric(row.cme.mspe, row.oracle->mspe);
    row.rel_pred_width = relative_metric(row.cme.pred_width, row.oracle->pred_width);
  }
  return row;
}

std::vector<ReplicationMetrics> run_scenario(const SimScenario& s, const MetricSink& sink) {
  s.validate();
  std::vector<ReplicationMetrics> rows(static_cast<std::size_t>(s.replications));
  std::mutex sink_mutex;

#pragma omp parallel for schedule(dynamic, 1)
  for (Index r = 0; r < s.replications; ++r) {
    ReplicationMetrics row;
    try {
      row = run_replication(s, r);
    } catch (const std::exception& e) {
      row.sigma = s.sigma;
      row.x_design = s.x_design;
      row.m = s.m;
      row.k1 = s.k1;
      row.k2 = s.k2;
      row.replication = r;
      row.seed = derive_seed(s.seed, static_cast<std::uint64_t>(r));
      row.status = e.what();
    }
    rows[static_cast<std::size_t>(r)] = row;
    if (sink) {
      std::lock_guard lock(sink_mutex);
      sink(row);
    }
  }
  return rows;
}

// ---- joint-distribution test ----

std::vector<GewekeTestFunction> default_geweke_functions() {
  return {
      {"beta_1", [](const ChainState& s) { return s.beta(0); }},
      {"beta_1_sq", [](const ChainState& s) { return s.beta(0) * s.beta(0); }},
      {"tau2", [](const ChainState& s) { return s.tau2; }},
      {"log_delta2", [](const ChainState& s) { return std::log(s.delta2); }},
      {"gamma_1", [](const ChainState& s) { return s.gamma(0); }},
  };
}

double GewekeReport::max_abs_z() const {
  double z = 0;
  for (const auto& st : stats) z = std::max(z, std::abs(st.z));
  return z;
}

ChainState draw_from_prior(Index p, Index k1, Index k2, Index n, const PriorConfig& prior, Rng& rng) {
  ChainState s;
  s.tau2 = rng.inv_gamma(prior.a0, prior.b0);
  s.xi = rng.inv_gamma(0.5, 1.0);
  s.delta2 = rng.inv_gamma(0.5, 1.0 / s.xi);
  s.nu.resize(p);
  s.lambda2.resize(p);
  s.beta.resize(p);
  for (Index j = 0; j < p; ++j) {
    s.nu(j) = rng.inv_gamma(0.5, 1.0);
    s.lambda2(j) = rng.inv_gamma(0.5, 1.0 / s.nu(j));
    s.beta(j) = std::sqrt(s.lambda2(j) * s.delta2 * s.tau2) * rng.normal();
  }
  s.gamma = std::sqrt(prior.sigma2_gamma) * rng.normal_vector(k1 * k2);
  s.d.assign(static_cast<std::size_t>(n), VectorXd::Zero(k2));
  return s;
}

void simulate_responses(DataSet& d, const ProjectionPair& proj, const ChainState& s, Rng& rng) {
  const MatrixXd G = gamma_as_matrix(s.gamma, proj.k1(), proj.k2());
  const double tau = std::sqrt(s.tau2);
  for (auto& b : d.blocks) {
    const VectorXd di = tau * (proj.r_gram_factor() * rng.normal_vector(proj.k2()));
    const VectorXd eps = tau * rng.normal_vector(b.m());
    b.y = b.X * s.beta + b.Z * (proj.S().transpose() * (G * di)) + eps;
  }
}

namespace {

struct Moments {
  double mean;
  double se;
};

Moments iid_moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= (n - 1);
  return {mean, std::sqrt(var / n)};
}

Moments batch_moments(const std::vector<double>& x, Index batches) {
  const auto size = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (Index b = 0; b < batches; ++b) {
    double acc = 0;
    for (std::size_t i = 0; i < size; ++i) acc += x[static_cast<std::size_t>(b) * size + i];
    means.push_back(acc / static_cast<double>(size));
  }
  const Moments bm = iid_moments(means);
  return {bm.mean, bm.se};
}

}  // namespace

GewekeReport geweke_joint_test(const GewekeConfig& cfg, const std::vector<GewekeTestFunction>& functions,
                               const GewekeTransition& transition) {
  if (cfg.samples < 2 * cfg.batches || cfg.batches < 2) throw ConfigError("geweke: too few samples for batching");
  cfg.prior.validate();

  Rng design_rng(derive_seed(cfg.seed, 1));
  DataSet data;
  data.p = cfg.p;
  data.q = cfg.q;
  for (Index i = 0; i < cfg.n; ++i) {
    SubjectBlock b;
    b.id = "g" + std::to_string(i + 1);
    b.X = design_rng.normal_matrix(cfg.m, cfg.p);
    b.Z = design_rng.normal_matrix(cfg.m, cfg.q);
    b.y = VectorXd::Zero(cfg.m);
    data.blocks.push_back(std::move(b));
  }
  const ProjectionPair proj = draw_projection_pair(cfg.q, cfg.k1, cfg.k2, derive_seed(cfg.seed, 2));

  const std::size_t nf = functions.size();
  std::vector<std::vector<double>> marginal(nf), successive(nf);
  for (auto& v : marginal) v.reserve(static_cast<std::size_t>(cfg.samples));
  for (auto& v : successive) v.reserve(static_cast<std::size_t>(cfg.samples));

  Rng mc_rng(derive_seed(cfg.seed, 3));
  for (Index t = 0; t < cfg.samples; ++t) {
    const ChainState s = draw_from_prior(cfg.p, cfg.k1, cfg.k2, cfg.n, cfg.prior, mc_rng);
    for (std::size_t f = 0; f < nf; ++f) marginal[f].push_back(functions[f].fn(s));
  }

  Rng sc_rng(derive_seed(cfg.seed, 4));
  ChainState state = draw_from_prior(cfg.p, cfg.k1, cfg.k2, cfg.n, cfg.prior, sc_rng);
  simulate_responses(data, proj, state, sc_rng);
  CmeSampler sampler(data, proj, cfg.prior);
  std::vector<VectorXd> ys(data.blocks.size());
  for (Index t = 0; t < cfg.burn_in + cfg.samples; ++t) {
    if (transition)
      transition(sampler, state, sc_rng);
    else
      sampler.step(state, sc_rng);
    simulate_responses(data, proj, state, sc_rng);
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = data.blocks[i].y;
    sampler.set_responses(ys);
    if (t >= cfg.burn_in)
      for (std::size_t f = 0; f < nf; ++f) successive[f].push_back(functions[f].fn(state));
  }

  GewekeReport report;
  for (std::size_t f = 0; f < nf; ++f) {
    const Moments a = iid_moments(marginal[f]);
    const Moments b = batch_moments(successive[f], cfg.batches);
    GewekeStat st;
    st.name = functions[f].name;
    st.marginal_mean = a.mean;
    st.marginal_se = a.se;
    st.successive_mean = b.mean;
    st.successive_se = b.se;
    st.z = (a.mean - b.mean) / std::sqrt(a.se * a.se + b.se * b.se);
    report.stats.push_back(st);
  }
  return report;
}

}  // namespace cme
