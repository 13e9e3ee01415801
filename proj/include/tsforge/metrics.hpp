#ifndef TSFORGE_METRICS_HPP
#define TSFORGE_METRICS_HPP

#include "tsforge/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tsforge {

enum class Metric { MDD, ACD, SD, KD, ED, DTW };

inline constexpr Metric kAllMetrics[] = {Metric::MDD, Metric::ACD, Metric::SD, Metric::KD, Metric::ED, Metric::DTW};

std::string to_string(Metric m);
Metric parse_metric(const std::string& s);
std::vector<Metric> parse_metric_list(const std::string& csv);
bool is_feature_metric(Metric m);

// Pairwise kernels ----------------------------------------------------------

template <typename A, typename B>
double euclidean_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size()) throw DataError("euclidean_distance: length mismatch");
  return (x.reshaped() - y.reshaped()).norm();
}

/// Square root of the cheapest warping path under squared-difference local cost, with an
/// optional Sakoe-Chiba band |i - j| <= window (widened to the length difference).
template <typename A, typename B>
double dtw_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y,
                    std::optional<Index> window = std::nullopt) {
  const Index n = x.size();
  const Index m = y.size();
  if (n == 0 || m == 0) throw DataError("dtw_distance: empty series");
  const Index band = window ? std::max(*window, std::abs(n - m)) : std::max(n, m);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(static_cast<std::size_t>(m + 1), inf), curr(static_cast<std::size_t>(m + 1), inf);
  prev[0] = 0.0;
  for (Index i = 1; i <= n; ++i) {
    std::fill(curr.begin(), curr.end(), inf);
    const Index lo = std::max<Index>(1, i - band);
    const Index hi = std::min<Index>(m, i + band);
    const double xi = x.reshaped()(i - 1);
    for (Index j = lo; j <= hi; ++j) {
      const double d = xi - y.reshaped()(j - 1);
      const auto ju = static_cast<std::size_t>(j);
      curr[ju] = d * d + std::min({prev[ju], prev[ju - 1], curr[ju - 1]});
    }
    std::swap(prev, curr);
  }
  return std::sqrt(prev[static_cast<std::size_t>(m)]);
}

/// Population skewness and (non-excess) kurtosis of all coefficients.
template <typename Derived>
std::pair<double, double> standardized_moments(const Eigen::DenseBase<Derived>& values) {
  const auto v = values.derived().reshaped().template cast<double>().array();
  const double n = static_cast<double>(v.size());
  const double mean = v.sum() / n;
  const auto centered = v - mean;
  const double var = centered.square().sum() / n;
  if (!(var > 0)) throw DataError("standardized moments: zero variance");
  const double sd = std::sqrt(var);
  return {centered.cube().sum() / n / (var * sd), centered.square().square().sum() / n / (var * var)};
}

// Set-level metrics ---------------------------------------------------------

struct MetricScore {
  std::vector<double> per_channel;  // NaN for skipped channels
  double value = 0.0;               // mean over scored channels
  std::vector<std::string> warnings;
};

/// Per (channel, timestep) histograms on the original data's bin grid, relative frequencies;
/// generated values outside the original range carry no mass.
MetricScore mdd(const InstanceSet& orig, const InstanceSet& gen, Index bins);

/// Instance-averaged ACF differences over lags 1..max_lag; constant channels are skipped.
MetricScore acd(const InstanceSet& orig, const InstanceSet& gen, Index max_lag);

MetricScore sd(const InstanceSet& orig, const InstanceSet& gen);
MetricScore kd(const InstanceSet& orig, const InstanceSet& gen);

enum class Pairing { Nearest, Index };

/// Mean over generated series of the distance to the nearest original (or to the original
/// with the same index).
MetricScore ed(const InstanceSet& orig, const InstanceSet& gen, Pairing pairing = Pairing::Nearest);
MetricScore dtw(const InstanceSet& orig, const InstanceSet& gen, std::optional<Index> window = std::nullopt,
                Pairing pairing = Pairing::Nearest);

struct MetricOptions {
  std::optional<Index> bins;     // default ceil(sqrt(I_orig))
  std::optional<Index> max_lag;  // default floor(L / 2)
  std::optional<Index> dtw_window;
  Pairing pairing = Pairing::Nearest;
};

struct MetricReport {
  std::map<Metric, MetricScore> scores;
  std::vector<std::string> channel_names;
  Index bins = 0;
  Index max_lag = 0;
  std::optional<Index> dtw_window;
  Pairing pairing = Pairing::Nearest;

  double value(Metric m) const { return scores.at(m).value; }
};

MetricReport evaluate(const InstanceSet& orig, const InstanceSet& gen, const std::vector<Metric>& metrics,
                      const MetricOptions& opts = {});

void write_report(const std::filesystem::path& path, const MetricReport& report);

// Cross-model comparison ----------------------------------------------------

struct ComparisonTable {
  std::vector<std::string> models;
  std::vector<Metric> metrics;
  Matrix raw;         // models x metrics
  Matrix normalized;  // min-max per metric column, all-equal -> 0
  Vector feature_average;
  Vector distance_average;
  Vector average_rank;
};

/// Ranks 1 = lowest score, ties share the mean rank.
Vector average_ranks_ascending(const Vector& scores);

ComparisonTable normalize_and_rank(const std::vector<std::pair<std::string, std::map<Metric, double>>>& raw);

void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table);

}  // namespace tsforge

#endif  // TSFORGE_METRICS_HPP
