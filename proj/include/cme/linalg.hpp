#pragma once

// Low-rank kernels for the compressed covariance C_i = M M^T + I.

#include <string_view>

#include <Eigen/Core>

#include "cme/model.hpp"
#include "cme/rng.hpp"

namespace cme {

// M = Z_i S^T Gamma L_R, where L_R L_R^T = R R^T. Then M M^T equals
// Z_i S^T Gamma R R^T Gamma^T S Z_i^T, so C_i = M M^T + I has all
// eigenvalues >= 1.
struct LowRankFactor {
  MatrixXd M;  // m_i x k2

  Index m() const { return M.rows(); }
  Index k2() const { return M.cols(); }
};

// Column-major reshape of vec(Gamma) into k1 x k2.
MatrixXd gamma_as_matrix(const VectorXd& gamma, Index k1, Index k2);

LowRankFactor low_rank_factor(const MatrixXd& Z, const ProjectionPair& proj, const VectorXd& gamma);

// Same factor from the cached projection Z_i S^T and the k1 x k2 product Gamma L_R.
LowRankFactor low_rank_factor_projected(const MatrixXd& ZSt, const MatrixXd& gamma_lr);

// C_i^{-1} v via I - M (I + M^T M)^{-1} M^T; never forms an m_i x m_i matrix.
VectorXd woodbury_inverse_apply(const LowRankFactor& f, const VectorXd& v);

// Symmetric inverse square root W of C_i from the thin SVD M = U diag(s) V^T:
//   W = I - U diag(1 - 1/sqrt(1 + s^2)) U^T.
class InverseSqrt {
 public:
  explicit InverseSqrt(const LowRankFactor& f);

  MatrixXd apply(const MatrixXd& A) const;
  VectorXd apply(const VectorXd& v) const;

  const MatrixXd& basis() const { return U_; }
  const VectorXd& shrink() const { return shrink_; }

 private:
  MatrixXd U_;
  VectorXd shrink_;
};

MatrixXd inverse_sqrt_apply(const LowRankFactor& f, const MatrixXd& A);

// The m_i rows of Z-check belonging to subject i: d_i^T (x) (Z_i S^T).
// Multiplying by vec(Gamma) gives Z_i S^T Gamma d_i.
MatrixXd kron_row_block(const MatrixXd& Z, const MatrixXd& S, const VectorXd& d);
MatrixXd kron_row_block_projected(const MatrixXd& ZSt, const VectorXd& d);

// Lower Cholesky factor of a symmetric positive definite matrix. On failure the
// diagonal is loaded with 1e-10 * trace / k, escalating x10 up to three times,
// before giving up with NumericError naming `what`.
MatrixXd jittered_cholesky(const MatrixXd& A, std::string_view what);

VectorXd mvn_sample(const VectorXd& mean, const MatrixXd& cov, Rng& rng);

// Draw from N(P^{-1} b, scale^2 P^{-1}) given the precision P.
VectorXd gaussian_from_precision(const MatrixXd& precision, const VectorXd& linear, double scale,
                                 Rng& rng, std::string_view what);

// Cubic B-spline basis with no interior knots on [min(times), max(times)],
// intercept column dropped (3 columns). Throws DataError on a degenerate range.
MatrixXd bspline_basis(const VectorXd& times, Index n_basis = 3);
// Same, with an explicit boundary range (used when several subjects share one range).
MatrixXd bspline_basis(const VectorXd& times, double lo, double hi, Index n_basis = 3);

}  // namespace cme
