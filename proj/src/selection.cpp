#include "cme/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>

#include "cme/errors.hpp"

namespace cme {

namespace {

Index split_prefix(std::span<const double> v) {
  const Index n = static_cast<Index>(v.size());
  double total = 0, total_sq = 0;
  for (double x : v) {
    total += x;
    total_sq += x * x;
  }
  Index best = 1;
  double best_sse = std::numeric_limits<double>::infinity();
  double low = 0;
  for (Index k = 1; k < n; ++k) {
    low += v[static_cast<std::size_t>(k - 1)];
    const double high = total - low;
    const double sse = total_sq - low * low / static_cast<double>(k) - high * high / static_cast<double>(n - k);
    if (sse < best_sse) {
      best_sse = sse;
      best = k;
    }
  }
  return best;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Index two_means_split(const std::vector<double>& sorted) {
  if (sorted.size() < 2) throw DataError("two_means_split: need at least two values");
  return split_prefix(sorted);
}

Index s2m_signal_count(const VectorXd& abs_values, double tol) {
  std::vector<double> v(abs_values.data(), abs_values.data() + abs_values.size());
  for (double& x : v) x = std::abs(x);
  std::sort(v.begin(), v.end());
  const Index p = static_cast<Index>(v.size());
  if (p == 0) return 0;
  if (p == 1) return v[0] > tol ? 1 : 0;

  Index noise = p;
  while (noise >= 2) {
    const std::span<const double> cur(v.data(), static_cast<std::size_t>(noise));
    const Index k = split_prefix(cur);
    const double c_low = mean_of(cur.first(static_cast<std::size_t>(k)));
    const double c_high = mean_of(cur.subspan(static_cast<std::size_t>(k)));
    if (c_high - c_low <= tol) break;
    noise = k;
  }
  return p - noise;
}

VectorXd column_medians(const MatrixXd& draws) {
  VectorXd med(draws.cols());
  for (Index j = 0; j < draws.cols(); ++j) {
    std::vector<double> col(draws.rows());
    for (Index t = 0; t < draws.rows(); ++t) col[static_cast<std::size_t>(t)] = draws(t, j);
    med(j) = quantile_type7(std::move(col), 0.5);
  }
  return med;
}

double default_s2m_tolerance(const MatrixXd& beta_draws) {
  if (beta_draws.rows() == 0) throw DataError("s2m: no draws");
  return column_medians(beta_draws).cwiseAbs().maxCoeff() / std::sqrt(static_cast<double>(beta_draws.rows()));
}

SelectionResult s2m_select(const MatrixXd& beta_draws, std::optional<double> tol) {
  const Index T = beta_draws.rows();
  const Index p = beta_draws.cols();
  if (T < 2) throw DataError("s2m_select needs at least two draws");
  if (tol && !(*tol > 0)) throw ConfigError("s2m tolerance must be positive");

  const VectorXd abs_median = column_medians(beta_draws).cwiseAbs();
  SelectionResult out;
  out.selected.assign(static_cast<std::size_t>(p), false);
  out.signal_count_per_draw.assign(static_cast<std::size_t>(T), 0);
  out.tolerance = tol ? *tol : abs_median.maxCoeff() / std::sqrt(static_cast<double>(T));
  if (!(out.tolerance > 0)) return out;  // every median is exactly zero

  std::map<Index, Index> tally;
  for (Index t = 0; t < T; ++t) {
    const Index c = s2m_signal_count(beta_draws.row(t).transpose(), out.tolerance);
    out.signal_count_per_draw[static_cast<std::size_t>(t)] = c;
    ++tally[c];
  }
  Index mode = 0, best = -1;
  for (const auto& [count, freq] : tally)
    if (freq > best) {
      best = freq;
      mode = count;
    }
  out.chosen_count = mode;

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return abs_median(a) > abs_median(b); });
  for (Index r = 0; r < mode; ++r) out.selected[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = true;
  return out;
}

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

IntervalSet credible_intervals(const MatrixXd& draws, double level) {
  if (!(level > 0 && level < 1)) throw ConfigError("interval level must lie in (0, 1)");
  if (draws.rows() < 2) throw DataError("credible_intervals needs at least two draws");
  const double alpha = (1.0 - level) / 2.0;
  IntervalSet out;
  out.level = level;
  out.lower.resize(draws.cols());
  out.upper.resize(draws.cols());
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Index j = 0; j < draws.cols(); ++j) {
    for (Index t = 0; t < draws.rows(); ++t) col[static_cast<std::size_t>(t)] = draws(t, j);
    out.lower(j) = quantile_type7(col, alpha);
    out.upper(j) = quantile_type7(col, 1.0 - alpha);
  }
  return out;
}

CoverageSummary coverage_and_width(const IntervalSet& intervals, const VectorXd& truth, bool split_by_signal) {
  const Index n = truth.size();
  if (intervals.lower.size() != n || intervals.upper.size() != n)
    throw DataError("coverage_and_width: interval and truth lengths differ");
  if (n == 0) throw DataError("coverage_and_width: empty input");

  struct Acc {
    double hits = 0, width = 0;
    Index count = 0;
  } all, sig, zero;
  for (Index j = 0; j < n; ++j) {
    const double hit = (truth(j) >= intervals.lower(j) && truth(j) <= intervals.upper(j)) ? 1.0 : 0.0;
    const double w = intervals.upper(j) - intervals.lower(j);
    for (Acc* a : {&all, truth(j) != 0.0 ? &sig : &zero}) {
      a->hits += hit;
      a->width += w;
      ++a->count;
    }
  }
  CoverageSummary out;
  out.coverage = all.hits / static_cast<double>(all.count);
  out.mean_width = all.width / static_cast<double>(all.count);
  if (split_by_signal) {
    if (sig.count > 0) {
      out.signal_coverage = sig.hits / static_cast<double>(sig.count);
      out.signal_width = sig.width / static_cast<double>(sig.count);
    }
    if (zero.count > 0) {
      out.zero_coverage = zero.hits / static_cast<double>(zero.count);
      out.zero_width = zero.width / static_cast<double>(zero.count);
    }
  }
  return out;
}

SelectionRates tpr_fpr(const std::vector<bool>& selected, const VectorXd& beta0) {
  if (static_cast<Index>(selected.size()) != beta0.size()) throw DataError("tpr_fpr: length mismatch");
  Index pos = 0, neg = 0, tp = 0, fp = 0;
  for (Index j = 0; j < beta0.size(); ++j) {
    const bool sel = selected[static_cast<std::size_t>(j)];
    if (beta0(j) != 0.0) {
      ++pos;
      tp += sel;
    } else {
      ++neg;
      fp += sel;
    }
  }
  SelectionRates r;
  if (pos > 0) r.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  return r;
}

double mspe(const std::vector<VectorXd>& y_true, const std::vector<VectorXd>& y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("mspe: subject counts differ");
  if (y_true.empty()) throw DataError("mspe: no subjects");
  double total = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i].size() != y_pred[i].size() || y_true[i].size() == 0)
      throw DataError("mspe: subject " + std::to_string(i + 1) + " has mismatched or empty vectors");
    total += (y_true[i] - y_pred[i]).squaredNorm() / static_cast<double>(y_true[i].size());
  }
  return total / static_cast<double>(y_true.size());
}

double relative_metric(double method_value, double oracle_value) {
  if (!(oracle_value > 0)) throw NumericError("relative metric: oracle value must be positive");
  return method_value / oracle_value;
}

}  // namespace cme
