#pragma once

// Fixed-effects selection (sequential 2-means), posterior intervals and the
// evaluation metrics of the simulation study.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cme/model.hpp"

namespace cme {

struct SelectionResult {
  std::vector<bool> selected;           // length p
  std::vector<Index> signal_count_per_draw;
  Index chosen_count = 0;
  double tolerance = 0;                 // the tolerance actually used
};

// Optimal two-cluster split of sorted values: returns the size of the lower
// cluster (1..n-1) minimising the within-cluster sum of squares.
Index two_means_split(const std::vector<double>& sorted);

// Per draw, 2-means on |beta_j|; the lower cluster is re-split until the two
// centres are within `tol`. Signals per draw = p - final noise cluster size.
// H = mode of the per-draw counts (ties go to the smaller count); the H
// coordinates with largest |posterior median| are selected.
SelectionResult s2m_select(const MatrixXd& beta_draws, std::optional<double> tol = std::nullopt);

// max_j |median beta_j| / sqrt(T_keep).
double default_s2m_tolerance(const MatrixXd& beta_draws);

// Signal count for a single draw.
Index s2m_signal_count(const VectorXd& abs_values, double tol);

struct IntervalSet {
  VectorXd lower;
  VectorXd upper;
  double level = 0.95;

  VectorXd width() const { return upper - lower; }
};

// Quantile with linear interpolation between order statistics ("type 7").
double quantile_type7(std::vector<double> values, double prob);

// Column-wise equal-tailed intervals.
IntervalSet credible_intervals(const MatrixXd& draws, double level = 0.95);

VectorXd column_medians(const MatrixXd& draws);

struct CoverageSummary {
  double coverage = 0;
  double mean_width = 0;
  // Split by the truth: non-zero coordinates vs zero coordinates.
  std::optional<double> signal_coverage;
  std::optional<double> signal_width;
  std::optional<double> zero_coverage;
  std::optional<double> zero_width;
};

CoverageSummary coverage_and_width(const IntervalSet& intervals, const VectorXd& truth,
                                   bool split_by_signal = false);

struct SelectionRates {
  std::optional<double> tpr;  // missing when beta0 has no non-zero entries
  std::optional<double> fpr;  // missing when beta0 has no zero entries
};

SelectionRates tpr_fpr(const std::vector<bool>& selected, const VectorXd& beta0);

// sum_i { sum_j (y_ij - yhat_ij)^2 / m_i } / n.
double mspe(const std::vector<VectorXd>& y_true, const std::vector<VectorXd>& y_pred);

double relative_metric(double method_value, double oracle_value);

}  // namespace cme
