#ifndef TSFORGE_FILTERING_HPP
#define TSFORGE_FILTERING_HPP

#include "tsforge/embedding.hpp"
#include "tsforge/text_codec.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tsforge {

/// Quantile with linear interpolation between order statistics (h = (n - 1) p).
template <typename Derived>
typename Derived::Scalar quantile_linear(const Eigen::DenseBase<Derived>& values, double p) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> v(values.derived().data(), values.derived().data() + values.size());
  if (v.empty()) throw DataError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + static_cast<Scalar>(h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

struct NormBounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double n) const { return lo <= n && n <= hi; }
};

/// [q1 - 3 IQR, q3 + 3 IQR]; needs at least 4 values.
NormBounds norm_bounds(std::span<const double> norms);

enum class Rejection { Missing, Duplicate, Norm };

std::string to_string(Rejection r);

/// Key used for duplicate detection: values rounded to 4 decimals.
using RowKey = std::vector<long long>;
RowKey row_key(const RowVector& row);

struct FilterCounters {
  Index missing = 0;
  Index duplicate = 0;
  Index norm = 0;
  Index accepted = 0;
};

struct BatchDisposition;
class FilterState;
BatchDisposition filter_batch(const std::vector<ParsedRow>& rows, FilterState& state);

/// Online filter state, seeded from the original embedding table.
class FilterState {
public:
  explicit FilterState(const EmbeddingTable& original);

  const std::vector<ChannelSpan>& spans() const { return spans_; }
  Index features() const { return features_; }
  Index channels() const { return static_cast<Index>(spans_.size()); }

  /// Squared norms of original and accepted rows per channel.
  const std::vector<std::vector<double>>& norms() const { return norms_; }
  /// Squared norms of accepted generated rows only.
  const std::vector<std::vector<double>>& generated_norms() const { return generated_norms_; }
  const std::vector<RowVector>& accepted_rows() const { return accepted_; }
  const FilterCounters& counters() const { return counters_; }
  Index accepted_count() const { return counters_.accepted; }

  bool seen(const RowVector& row) const { return keys_.contains(row_key(row)); }
  Matrix accepted_table() const;

private:
  friend BatchDisposition filter_batch(const std::vector<ParsedRow>& rows, FilterState& state);

  std::vector<ChannelSpan> spans_;
  Index features_ = 0;
  std::vector<std::vector<double>> norms_;
  std::vector<std::vector<double>> generated_norms_;
  std::vector<RowVector> accepted_;
  std::set<RowKey> keys_;
  FilterCounters counters_;
};

struct ChannelNormStats {
  NormBounds bounds;
  double accepted_mean = 0.0;  // NaN when nothing was accepted
  double rejected_mean = 0.0;  // over norm-rejected rows, NaN when none
};

struct BatchDisposition {
  /// One entry per input row; empty means accepted.
  std::vector<std::optional<Rejection>> outcome;
  std::vector<RowVector> accepted;
  std::vector<ChannelNormStats> channel_stats;
  FilterCounters counts;
};

/// Missing -> duplicate (vs. originals and everything accepted so far) -> norm outside the
/// pre-batch bounds of any channel. Accepted rows are committed in row order.
BatchDisposition filter_batch(const std::vector<ParsedRow>& rows, FilterState& state);

/// u^c / I~ per channel, u^c = distinct 4-decimal rounded generated norms. 1.0 before any acceptance.
std::vector<double> diversity_score(const FilterState& state);

enum class StopDecision { Continue, Collapse, Cap, Target };

std::string to_string(StopDecision d);

struct StopParams {
  double lambda_stop = 0.1;
  Index max_accepted = 1000;
  /// Fixed-count mode when set.
  std::optional<Index> target;

  /// Defaults tied to a target: lambda 0.1, cap 10 x target.
  static StopParams for_target(Index target);
};

/// Target reached, then max_c D^c < lambda_stop, then accepted count above the cap.
StopDecision should_stop(std::span<const double> diversity, Index accepted, const StopParams& params);
StopDecision should_stop(const FilterState& state, const StopParams& params);

}  // namespace tsforge

#endif  // TSFORGE_FILTERING_HPP
