#pragma once

// Domain types shared by the samplers, the simulation harness and the CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace cme {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One subject's observations: y_i (m_i), X_i (m_i x p), Z_i (m_i x q).
struct SubjectBlock {
  std::string id;
  VectorXd y;
  MatrixXd X;
  MatrixXd Z;

  Index m() const { return X.rows(); }
};

struct DataSet {
  std::vector<SubjectBlock> blocks;
  Index p = 0;
  Index q = 0;

  Index n() const { return static_cast<Index>(blocks.size()); }
  Index total_obs() const;

  // Row-wise stacking across subjects, in block order.
  VectorXd stacked_y() const;
  MatrixXd stacked_X() const;
  // Starting row of each block in the stacked layout.
  std::vector<Index> row_offsets() const;
};

struct ValidationOptions {
  // Test designs for prediction may carry no response.
  bool require_response = true;
};

// Every invariant violation, one human-readable line each. Empty when valid.
std::vector<std::string> dataset_violations(const DataSet& d, const ValidationOptions& opts = {});

// Returns `d` unchanged when valid, otherwise throws DataError listing all violations.
const DataSet& validate_dataset(const DataSet& d, const ValidationOptions& opts = {});

// The fixed random compression matrices R (k2 x q) and S (k1 x q).
//
// The pair is immutable once built. It also caches the lower Cholesky factor
// of R R^T, which lets the compressed covariance Z S^T Gamma R R^T Gamma^T S Z^T
// be written through an m x k2 factor.
class ProjectionPair {
 public:
  ProjectionPair(MatrixXd R, MatrixXd S, std::uint64_t seed);

  const MatrixXd& R() const { return R_; }
  const MatrixXd& S() const { return S_; }
  const MatrixXd& r_gram_factor() const { return r_chol_; }
  Index k1() const { return S_.rows(); }
  Index k2() const { return R_.rows(); }
  Index q() const { return S_.cols(); }
  std::uint64_t seed() const { return seed_; }

  // FNV-1a hash over the raw bytes of R and S.
  std::uint64_t fingerprint() const;

 private:
  MatrixXd R_;
  MatrixXd S_;
  MatrixXd r_chol_;
  std::uint64_t seed_;
};

// S entries iid N(0, 1/k1), R entries iid N(0, 1/k2). Requires 1 <= k1, k2 <= q.
ProjectionPair draw_projection_pair(Index q, Index k1, Index k2, std::uint64_t seed);

struct PriorConfig {
  double a0 = 0.01;
  double b0 = 0.01;
  double sigma2_gamma = 1.0;

  void validate() const;
};

struct ChainState {
  VectorXd beta;
  double tau2 = 1.0;
  VectorXd gamma;  // column-major vec(Gamma), length k1 * k2
  VectorXd lambda2;
  double delta2 = 1.0;
  VectorXd nu;
  double xi = 1.0;
  std::vector<VectorXd> d;  // compressed random effects, one per subject
};

std::vector<std::string> state_violations(const ChainState& s, Index k1, Index k2);

struct DrawMeta {
  Index iterations = 0;
  Index burn_in = 0;
  Index thin = 1;
  std::uint64_t seed = 0;
};

// Post burn-in, thinned draws in iteration order.
struct PosteriorDraws {
  MatrixXd beta;   // T_keep x p
  VectorXd tau2;   // T_keep
  MatrixXd gamma;  // T_keep x (k1 k2); zero columns for the oracle sampler
  DrawMeta meta;

  Index kept() const { return beta.rows(); }
};

enum class SigmaStructure { diagonal, block_diagonal, toeplitz };

std::string_view to_string(SigmaStructure s);
SigmaStructure parse_sigma_structure(std::string_view s);

struct TruthSpec {
  VectorXd beta0;
  MatrixXd Sigma0;
  double tau0_sq = 1.0;
  SigmaStructure sigma_label = SigmaStructure::diagonal;

  void validate() const;
};

struct FitConfig {
  Index k1 = 3;
  Index k2 = 3;
  Index iterations = 15000;
  Index burn_in = 5000;
  Index thin = 1;
  std::uint64_t seed = 1;
  PriorConfig prior;
  // Sequential 2-means tolerance; defaults to max|median beta_j| / sqrt(T_keep).
  std::optional<double> s2m_tol;

  void validate() const;
  void validate_for(Index q) const;
  Index kept_draws() const { return (iterations - burn_in) / thin; }
};

// One master seed fans out into the three streams a run needs.
struct SeedSet {
  std::uint64_t projection;
  std::uint64_t chain;
  std::uint64_t data;
};

SeedSet split_seed(std::uint64_t master);

}  // namespace cme
