#include <doctest.h>

#include "cme/horseshoe.hpp"
#include "oracle_suites.hpp"

using namespace cme;

TEST_CASE("every full conditional is proportional to prior x likelihood") {
  for (std::uint64_t seed : {1u, 2u, 3u})
    for (const auto& r : test::conjugacy_suite(seed)) {
      INFO(r.name << " seed " << seed);
      CHECK(r.spread < 1e-8);
    }
}

TEST_CASE("delta2 with beta = 0 and xi = 1 is IG((p+1)/2, 1)") {
  ChainState s;
  s.beta = VectorXd::Zero(7);
  s.lambda2 = VectorXd::Constant(7, 2.0);
  s.nu = VectorXd::Ones(7);
  s.xi = 1.0;
  s.tau2 = 3.0;
  const InvGammaParams ig = horseshoe::delta2_conditional(s);
  CHECK(ig.shape == doctest::Approx(4.0));
  CHECK(ig.scale == doctest::Approx(1.0));
}

TEST_CASE("xi given delta2 = 1 is IG(1, 2) with median 2 / ln 2") {
  ChainState s;
  s.delta2 = 1.0;
  const InvGammaParams ig = horseshoe::xi_conditional(s);
  CHECK(ig.shape == doctest::Approx(1.0));
  CHECK(ig.scale == doctest::Approx(2.0));
  Rng rng(4);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.inv_gamma(ig.shape, ig.scale);
  std::nth_element(x.begin(), x.begin() + 50000, x.end());
  CHECK(x[50000] == doctest::Approx(2.0 / std::log(2.0)).epsilon(0.03));
}

TEST_CASE("tau2: zero residual and zero beta give IG(a0 + (N+p)/2, b0)") {
  WhitenedData w{VectorXd::Zero(6), MatrixXd::Ones(6, 3), {}};
  ChainState s;
  s.beta = VectorXd::Zero(3);
  s.lambda2 = VectorXd::Ones(3);
  s.delta2 = 1.0;
  const PriorConfig prior{0.01, 0.02, 1.0};
  const InvGammaParams ig = horseshoe::tau2_conditional(s, w, prior);
  CHECK(ig.shape == doctest::Approx(0.01 + 4.5));
  CHECK(ig.scale == doctest::Approx(0.02));
}

TEST_CASE("tau2 scale matches a hand residual sum") {
  Rng rng(2);
  WhitenedData w{rng.normal_vector(5), rng.normal_matrix(5, 2), {}};
  ChainState s;
  s.beta = (VectorXd(2) << 0.3, -1.2).finished();
  s.lambda2 = (VectorXd(2) << 0.5, 2.0).finished();
  s.delta2 = 0.8;
  const PriorConfig prior{1.0, 2.0, 1.0};
  double rss = 0;
  for (Index i = 0; i < 5; ++i) {
    const double r = w.y_star(i) - w.X_star(i, 0) * 0.3 + w.X_star(i, 1) * 1.2;
    rss += r * r;
  }
  const double pen = 0.09 / (0.8 * 0.5) + 1.44 / (0.8 * 2.0);
  CHECK(horseshoe::tau2_conditional(s, w, prior).scale == doctest::Approx(2.0 + rss / 2 + pen / 2).epsilon(1e-12));

  for (int t = 0; t < 1000; ++t) {
    horseshoe::sample_tau2(s, w, prior, rng);
    CHECK(s.tau2 > 0);
  }
}

TEST_CASE("beta: unit ridge gives mean y/2") {
  const VectorXd y = (VectorXd(3) << 2, -4, 1).finished();
  WhitenedData w{y, MatrixXd::Identity(3, 3), {}};
  ChainState s;
  s.beta = VectorXd::Zero(3);
  s.lambda2 = VectorXd::Ones(3);
  s.delta2 = 1;
  s.tau2 = 1;
  const GaussianParams gp = horseshoe::beta_conditional(s, w);
  CHECK((gp.mean - y / 2).norm() < 1e-12);
  CHECK((gp.cov - MatrixXd::Identity(3, 3) / 2).norm() < 1e-12);
}

TEST_CASE("solver choice follows the flop count") {
  CHECK(horseshoe::choose_beta_solver(432, 300) == horseshoe::BetaSolver::precision);
  CHECK(horseshoe::choose_beta_solver(50, 300) == horseshoe::BetaSolver::dual);
  CHECK(horseshoe::choose_beta_solver(10, 10) == horseshoe::BetaSolver::precision);
}

namespace {

// Empirical mean and covariance of `draws` sampler calls, with 4-sigma checks
// against the closed form.
void check_beta_moments(horseshoe::BetaSolver solver, bool with_gram) {
  Rng rng(with_gram ? 17 : 18);
  const Index N = 4, p = 6;
  WhitenedData w{rng.normal_vector(N), rng.normal_matrix(N, p), {}};
  if (with_gram) w.gram = w.X_star.transpose() * w.X_star;
  ChainState s;
  s.beta = VectorXd::Zero(p);
  s.lambda2 = (rng.normal_vector(p).array().square() + 0.2).matrix();
  s.delta2 = 0.7;
  s.tau2 = 1.3;
  const GaussianParams gp = horseshoe::beta_conditional(s, w);

  const int T = 100000;
  VectorXd sum = VectorXd::Zero(p);
  MatrixXd sq = MatrixXd::Zero(p, p);
  for (int t = 0; t < T; ++t) {
    horseshoe::sample_beta(s, w, rng, solver);
    sum += s.beta;
    sq += (s.beta - gp.mean) * (s.beta - gp.mean).transpose();
  }
  const VectorXd mean = sum / T;
  const MatrixXd cov = sq / T;
  for (Index j = 0; j < p; ++j) {
    CHECK(std::abs(mean(j) - gp.mean(j)) < 4 * std::sqrt(gp.cov(j, j) / T));
    for (Index k = 0; k < p; ++k) {
      const double se = std::sqrt((gp.cov(j, j) * gp.cov(k, k) + gp.cov(j, k) * gp.cov(j, k)) / T);
      CHECK(std::abs(cov(j, k) - gp.cov(j, k)) < 4 * se);
    }
  }
}

}  // namespace

TEST_CASE("beta draws match the closed form on both solver paths (p = 6 > N = 4)") {
  check_beta_moments(horseshoe::BetaSolver::precision, true);
  check_beta_moments(horseshoe::BetaSolver::dual, false);
}

TEST_CASE("horseshoe step: fixed seed reproduces, draws stay positive") {
  Rng r0(3);
  WhitenedData w{r0.normal_vector(8), r0.normal_matrix(8, 4), {}};
  w.gram = w.X_star.transpose() * w.X_star;
  ChainState s;
  s.beta = VectorXd::Zero(4);
  s.lambda2 = s.nu = VectorXd::Ones(4);
  ChainState a = s, b = s;
  Rng ra(10), rb(10);
  const PriorConfig prior;
  for (int t = 0; t < 1000; ++t) {
    horseshoe::step(a, w, prior, ra);
    horseshoe::step(b, w, prior, rb);
    REQUIRE(state_violations(a, 0, 0).empty());
  }
  CHECK(a.beta == b.beta);
  CHECK(a.tau2 == b.tau2);
  CHECK(a.tau2 > 0);
  CHECK(a.delta2 > 0);
  CHECK((a.lambda2.array() > 0).all());
}
