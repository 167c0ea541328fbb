#include <doctest.h>

#include <Eigen/SVD>

#include "cme/errors.hpp"
#include "cme/simulation.hpp"

using namespace cme;

TEST_CASE("gen_sigma structures") {
  Rng rng(1);
  const MatrixXd diag = gen_sigma(SigmaStructure::diagonal, 14, rng);
  CHECK(diag.trace() == doctest::Approx(3.5));
  CHECK(diag(6, 6) == 0.5);
  CHECK(diag(7, 7) == 0.0);
  CHECK((diag - MatrixXd(diag.diagonal().asDiagonal())).norm() == 0.0);

  const MatrixXd toep = gen_sigma(SigmaStructure::toeplitz, 3, rng);
  const MatrixXd expect = (MatrixXd(3, 3) << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1).finished();
  CHECK((toep - expect).norm() == 0.0);

  const MatrixXd block = gen_sigma(SigmaStructure::block_diagonal, 14, rng);
  const Eigen::JacobiSVD<MatrixXd> svd(block);
  const VectorXd sv = svd.singularValues();
  CHECK(sv(2) > 1e-8);
  CHECK(sv(3) < 1e-10 * sv(0));
  // Supports {0..4}, {5..9}, {10..13} do not interact.
  CHECK(block.block(0, 5, 5, 9).norm() == 0.0);
  CHECK(block.block(5, 10, 5, 4).norm() == 0.0);
  CHECK((block - block.transpose()).norm() == 0.0);
  CHECK_THROWS_AS(gen_sigma(SigmaStructure::block_diagonal, 10, rng), ConfigError);
}

TEST_CASE("true_beta") {
  const VectorXd b = true_beta(300);
  CHECK(b.size() == 300);
  CHECK(b.head(5) == (VectorXd(5) << 1, 0.5, 0.2, 0.1, 0.05).finished());
  CHECK(b.tail(295).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.squaredNorm() == doctest::Approx(1.3025));
}

TEST_CASE("gen_dataset is deterministic and nested across m") {
  SimScenario s;
  s.p = 20;
  s.n = 5;
  s.test_subjects = 3;
  s.m = 4;
  const SimData a = gen_dataset(s, 99);
  const SimData b = gen_dataset(s, 99);
  CHECK(a.train.stacked_y() == b.train.stacked_y());
  CHECK(a.test.stacked_X() == b.test.stacked_X());
  CHECK(a.train.n() == 5);
  CHECK(a.test.n() == 3);
  CHECK(a.train.total_obs() == 20);
  CHECK(dataset_violations(a.train).empty());

  s.m = 12;
  const SimData big = gen_dataset(s, 99);
  for (Index i = 0; i < 5; ++i) {
    const auto& lo = a.train.blocks[static_cast<std::size_t>(i)];
    const auto& hi = big.train.blocks[static_cast<std::size_t>(i)];
    CHECK(hi.X.topRows(4) == lo.X);
    CHECK(hi.Z.topRows(4) == lo.Z);
    CHECK(hi.y.head(4) == lo.y);
  }
  CHECK(gen_dataset(s, 100).train.stacked_y() != big.train.stacked_y());
}

TEST_CASE("simulated response variance: |beta0|^2 + tr(Sigma0) + tau0^2") {
  SimScenario s;
  s.p = 10;
  s.n = 20000;
  s.m = 1;
  s.test_subjects = 1;
  const SimData d = gen_dataset(s, 5);
  const VectorXd y = d.train.stacked_y();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  CHECK(var == doctest::Approx(5.8025).epsilon(0.05));
  CHECK(std::abs(mean) < 4 * std::sqrt(5.8025 / 20000.0));

  const VectorXd resid = y - d.train.stacked_X() * d.truth.beta0;
  CHECK(resid.squaredNorm() / static_cast<double>(y.size()) == doctest::Approx(4.5).epsilon(0.05));
}

TEST_CASE("scenario grid sizes") {
  SimScenario s;
  CHECK(scenario_grid(s, false).size() == 9);
  CHECK(scenario_grid(s, true).size() == 81);
  s.q = 10;
  bool rejected = false;
  for (const auto& g : scenario_grid(s, false)) {
    try {
      g.validate();
    } catch (const ConfigError&) {
      rejected = true;
    }
  }
  CHECK(rejected);
}

TEST_CASE("run_scenario: tiny study produces populated deterministic rows") {
  SimScenario s;
  s.p = 10;
  s.q = 4;
  s.n = 6;
  s.m = 3;
  s.k1 = s.k2 = 2;
  s.replications = 2;
  s.test_subjects = 3;
  s.iterations = 80;
  s.burn_in = 30;
  int seen = 0;
  const auto rows = run_scenario(s, [&](const ReplicationMetrics&) { ++seen; });
  CHECK(seen == 2);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    INFO(r.status);
    CHECK(r.ok());
    CHECK(r.m == 3);
    CHECK(r.oracle.has_value());
    CHECK(r.rel_mspe.has_value());
    CHECK(std::isfinite(r.cme.mspe));
    CHECK(r.cme.pred_coverage >= 0.0);
    CHECK(r.cme.pred_coverage <= 1.0);
    CHECK(r.cme.risk >= 0.0);
  }
  CHECK(rows[0].seed != rows[1].seed);
  const auto again = run_scenario(s);
  CHECK(again[0].cme.mspe == rows[0].cme.mspe);
  CHECK(again[1].oracle->pred_width == rows[1].oracle->pred_width);
}

TEST_CASE("joint-distribution check: short run is finite and not wildly off") {
  GewekeConfig cfg;
  cfg.samples = 4000;
  cfg.burn_in = 200;
  cfg.batches = 20;
  const GewekeReport r = geweke_joint_test(cfg);
  CHECK(r.stats.size() == default_geweke_functions().size());
  for (const auto& st : r.stats) {
    INFO(st.name << " z=" << st.z);
    CHECK(std::isfinite(st.z));
    CHECK(st.marginal_se > 0);
    CHECK(st.successive_se > 0);
  }
  CHECK(r.max_abs_z() < 5.0);
}
