#pragma once

// Simulation study: synthetic data, replication loops, metric rows, and the
// joint-distribution (Geweke) correctness check for the sampler.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cme/gibbs.hpp"
#include "cme/model.hpp"
#include "cme/rng.hpp"

namespace cme {

enum class XDesign { independent, toeplitz };

std::string_view to_string(XDesign x);
XDesign parse_x_design(std::string_view s);

struct SimScenario {
  Index p = 300;
  Index q = 14;
  Index n = 36;
  Index m = 12;
  SigmaStructure sigma = SigmaStructure::diagonal;
  XDesign x_design = XDesign::independent;
  Index k1 = 3;
  Index k2 = 3;
  Index replications = 10;
  Index test_subjects = 12;
  double tau0_sq = 1.0;
  std::uint64_t seed = 2024;
  Index iterations = 15000;
  Index burn_in = 5000;
  Index thin = 1;
  PriorConfig prior;
  bool with_oracle = true;
  std::optional<double> s2m_tol;

  void validate() const;
  FitConfig fit_config(std::uint64_t chain_seed) const;
};

// The nine (Sigma x m) settings for a fixed (k1, k2); with `k_grid`, crossed
// with k1, k2 in {3, 7, 14}.
std::vector<SimScenario> scenario_grid(const SimScenario& base, bool k_grid);

// diagonal: 0.5 on the first ceil(q/2) diagonal entries, zero elsewhere.
// block-diagonal (q = 14 only): L L^T, L with three columns of U[0, 3]
// entries on rows 1-5, 6-10, 11-14. toeplitz: 0.5^|i-j|.
MatrixXd gen_sigma(SigmaStructure label, Index q, Rng& rng);

// (1, 0.5, 0.2, 0.1, 0.05, 0, ..., 0).
VectorXd true_beta(Index p);

struct SimData {
  DataSet train;
  DataSet test;
  TruthSpec truth;
};

// Each subject draws from its own stream, observation by observation, so
// designs with smaller m are the leading rows of designs with larger m.
SimData gen_dataset(const SimScenario& s, std::uint64_t data_seed);

struct MethodMetrics {
  double tpr = 0;
  double fpr = 0;
  double signal_coverage = 0;
  double zero_coverage = 0;
  double signal_width = 0;
  double zero_width = 0;
  double mspe = 0;
  double pred_coverage = 0;
  double pred_width = 0;
  double risk = 0;  // |X beta0 - X beta_bar|^2 / N on the training design
  Index selected = 0;
};

struct ReplicationMetrics {
  SigmaStructure sigma = SigmaStructure::diagonal;
  XDesign x_design = XDesign::independent;
  Index m = 0;
  Index k1 = 0;
  Index k2 = 0;
  Index replication = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  MethodMetrics cme;
  std::optional<MethodMetrics> oracle;
  std::optional<double> rel_mspe;
  std::optional<double> rel_pred_width;

  bool ok() const { return status == "ok"; }
};

// Evaluates one method's draws and predictive draws against the truth.
MethodMetrics evaluate_fit(const SimData& data, const PosteriorDraws& draws, const MatrixXd& predictive,
                           std::optional<double> s2m_tol);

ReplicationMetrics run_replication(const SimScenario& s, Index replication);

using MetricSink = std::function<void(const ReplicationMetrics&)>;

// Replications run in parallel; `sink` sees each finished row (serialised).
// A failing replication is recorded with its error in `status`.
std::vector<ReplicationMetrics> run_scenario(const SimScenario& s, const MetricSink& sink = {});

// ---- joint-distribution test ----

struct GewekeConfig {
  Index n = 4;
  Index m = 3;
  Index p = 5;
  Index q = 3;
  Index k1 = 2;
  Index k2 = 2;
  Index samples = 50000;
  Index burn_in = 1000;  // successive-conditional warm-up
  Index batches = 50;    // batch means for the autocorrelated arm
  std::uint64_t seed = 7;
  PriorConfig prior{3.0, 2.0, 1.0};
};

struct GewekeTestFunction {
  std::string name;
  std::function<double(const ChainState&)> fn;
};

// beta_1, beta_1^2, tau2, log delta2, gamma_1.
std::vector<GewekeTestFunction> default_geweke_functions();

struct GewekeStat {
  std::string name;
  double marginal_mean = 0;
  double marginal_se = 0;
  double successive_mean = 0;
  double successive_se = 0;
  double z = 0;
};

struct GewekeReport {
  std::vector<GewekeStat> stats;
  double max_abs_z() const;
};

// One sampler transition on the current data; defaults to CmeSampler::step.
using GewekeTransition = std::function<void(const CmeSampler&, ChainState&, Rng&)>;

// Draw of every parameter from its prior (the marginal-conditional arm).
ChainState draw_from_prior(Index p, Index k1, Index k2, Index n, const PriorConfig& prior, Rng& rng);

// y_i = X_i beta + Z_i S^T Gamma d_i + eps_i with d_i ~ N(0, tau2 R R^T), eps_i ~ N(0, tau2 I).
void simulate_responses(DataSet& d, const ProjectionPair& proj, const ChainState& s, Rng& rng);

GewekeReport geweke_joint_test(const GewekeConfig& cfg,
                               const std::vector<GewekeTestFunction>& functions = default_geweke_functions(),
                               const GewekeTransition& transition = {});

}  // namespace cme
