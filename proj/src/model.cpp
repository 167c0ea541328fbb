#include "cme/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cme/errors.hpp"
#include "cme/rng.hpp"

namespace cme {

Index DataSet::total_obs() const {
  Index total = 0;
  for (const auto& b : blocks) total += b.m();
  return total;
}

std::vector<Index> DataSet::row_offsets() const {
  std::vector<Index> offsets;
  offsets.reserve(blocks.size());
  Index row = 0;
  for (const auto& b : blocks) {
    offsets.push_back(row);
    row += b.m();
  }
  return offsets;
}

VectorXd DataSet::stacked_y() const {
  VectorXd y(total_obs());
  Index row = 0;
  for (const auto& b : blocks) {
    y.segment(row, b.m()) = b.y;
    row += b.m();
  }
  return y;
}

MatrixXd DataSet::stacked_X() const {
  MatrixXd X(total_obs(), p);
  Index row = 0;
  for (const auto& b : blocks) {
    X.middleRows(row, b.m()) = b.X;
    row += b.m();
  }
  return X;
}

std::vector<std::string> dataset_violations(const DataSet& d, const ValidationOptions& opts) {
  std::vector<std::string> out;
  if (d.blocks.empty()) {
    out.emplace_back("dataset is empty");
    return out;
  }
  if (d.p < 1) out.emplace_back("p must be at least 1");
  if (d.q < 1) out.emplace_back("q must be at least 1");

  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    const auto& b = d.blocks[k];
    const std::string where = "block " + std::to_string(k + 1);
    const Index m = b.m();
    if (m < 1) out.push_back(where + ": no observations");
    if (b.X.cols() != d.p)
      out.push_back(where + ": X has " + std::to_string(b.X.cols()) + " columns, expected " +
                    std::to_string(d.p));
    if (b.Z.cols() != d.q)
      out.push_back(where + ": Z has " + std::to_string(b.Z.cols()) + " columns, expected " +
                    std::to_string(d.q));
    if (b.Z.rows() != m)
      out.push_back(where + ": Z has " + std::to_string(b.Z.rows()) + " rows, X has " +
                    std::to_string(m));
    if (opts.require_response && b.y.size() != m)
      out.push_back(where + ": y has length " + std::to_string(b.y.size()) + ", expected " +
                    std::to_string(m));
    if (opts.require_response && !b.y.allFinite()) out.push_back(where + ": y has non-finite values");
    if (!b.X.allFinite()) out.push_back(where + ": X has non-finite values");
    if (!b.Z.allFinite()) out.push_back(where + ": Z has non-finite values");
  }
  return out;
}

const DataSet& validate_dataset(const DataSet& d, const ValidationOptions& opts) {
  const auto issues = dataset_violations(d, opts);
  if (!issues.empty()) {
    std::string msg;
    for (const auto& s : issues) {
      if (!msg.empty()) msg += "; ";
      msg += s;
    }
    throw DataError(msg);
  }
  return d;
}

ProjectionPair::ProjectionPair(MatrixXd R, MatrixXd S, std::uint64_t seed)
    : R_(std::move(R)), S_(std::move(S)), seed_(seed) {
  if (R_.cols() != S_.cols())
    throw ConfigError("projection pair: R and S must have the same number of columns");
  if (!R_.allFinite() || !S_.allFinite()) throw NumericError("projection pair: non-finite entries");
  Eigen::LLT<MatrixXd> llt(R_ * R_.transpose());
  if (llt.info() != Eigen::Success) throw NumericError("projection pair: R R^T is not positive definite");
  r_chol_ = llt.matrixL();
}

std::uint64_t ProjectionPair::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const MatrixXd& a) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(a.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(a.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(R_);
  mix(S_);
  return h;
}

ProjectionPair draw_projection_pair(Index q, Index k1, Index k2, std::uint64_t seed) {
  if (q < 1 || k1 < 1 || k2 < 1 || k1 > q || k2 > q) {
    std::ostringstream os;
    os << "projection dimensions must satisfy 1 <= k1, k2 <= q (got q=" << q << ", k1=" << k1
       << ", k2=" << k2 << ")";
    throw ConfigError(os.str());
  }
  Rng rng(seed);
  MatrixXd S = rng.normal_matrix(k1, q) / std::sqrt(static_cast<double>(k1));
  MatrixXd R = rng.normal_matrix(k2, q) / std::sqrt(static_cast<double>(k2));
  return ProjectionPair(std::move(R), std::move(S), seed);
}

void PriorConfig::validate() const {
  if (!(a0 > 0)) throw ConfigError("prior.a0 must be positive");
  if (!(b0 > 0)) throw ConfigError("prior.b0 must be positive");
  if (!(sigma2_gamma > 0)) throw ConfigError("prior.sigma2_gamma must be positive");
}

std::vector<std::string> state_violations(const ChainState& s, Index k1, Index k2) {
  std::vector<std::string> out;
  auto positive = [](double v) { return std::isfinite(v) && v > 0; };
  if (!positive(s.tau2)) out.emplace_back("tau2 not positive");
  if (!positive(s.delta2)) out.emplace_back("delta2 not positive");
  if (!positive(s.xi)) out.emplace_back("xi not positive");
  if (!s.beta.allFinite()) out.emplace_back("beta not finite");
  if (s.lambda2.size() != s.beta.size() || s.nu.size() != s.beta.size())
    out.emplace_back("shrinkage vectors do not match beta length");
  for (Index j = 0; j < s.lambda2.size(); ++j)
    if (!positive(s.lambda2(j))) {
      out.push_back("lambda2[" + std::to_string(j) + "] not positive");
      break;
    }
  for (Index j = 0; j < s.nu.size(); ++j)
    if (!positive(s.nu(j))) {
      out.push_back("nu[" + std::to_string(j) + "] not positive");
      break;
    }
  if (s.gamma.size() != k1 * k2) out.emplace_back("gamma length differs from k1*k2");
  if (!s.gamma.allFinite()) out.emplace_back("gamma not finite");
  for (const auto& di : s.d)
    if (di.size() != k2 || !di.allFinite()) {
      out.emplace_back("d_i has wrong length or non-finite entries");
      break;
    }
  return out;
}

std::string_view to_string(SigmaStructure s) {
  switch (s) {
    case SigmaStructure::diagonal: return "diagonal";
    case SigmaStructure::block_diagonal: return "block-diagonal";
    case SigmaStructure::toeplitz: return "toeplitz";
  }
  return "unknown";
}

SigmaStructure parse_sigma_structure(std::string_view s) {
  if (s == "diagonal") return SigmaStructure::diagonal;
  if (s == "block-diagonal" || s == "block") return SigmaStructure::block_diagonal;
  if (s == "toeplitz") return SigmaStructure::toeplitz;
  throw ConfigError("unknown sigma structure '" + std::string(s) +
                    "' (expected diagonal, block-diagonal or toeplitz)");
}

void TruthSpec::validate() const {
  if (!beta0.allFinite()) throw DataError("truth: beta0 has non-finite entries");
  if (Sigma0.rows() != Sigma0.cols()) throw DataError("truth: Sigma0 is not square");
  if (!Sigma0.allFinite()) throw DataError("truth: Sigma0 has non-finite entries");
  if ((Sigma0 - Sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Sigma0.cwiseAbs().maxCoeff()))
    throw DataError("truth: Sigma0 is not symmetric");
  if (Sigma0.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sigma0, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw DataError("truth: Sigma0 is not positive semidefinite");
  }
  if (!(tau0_sq > 0)) throw DataError("truth: tau0_sq must be positive");
}

void FitConfig::validate() const {
  if (k1 < 1 || k2 < 1) throw ConfigError("k1 and k2 must be at least 1");
  if (burn_in < 0) throw ConfigError("burn_in must be non-negative");
  if (iterations <= burn_in) throw ConfigError("iterations must exceed burn_in");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (s2m_tol && !(*s2m_tol > 0)) throw ConfigError("s2m_tol must be positive");
  prior.validate();
}

void FitConfig::validate_for(Index q) const {
  validate();
  if (k1 > q || k2 > q)
    throw ConfigError("k1 and k2 must not exceed q=" + std::to_string(q));
}

SeedSet split_seed(std::uint64_t master) {
  return {derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3)};
}

}  // namespace cme
