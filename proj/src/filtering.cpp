#include "tsforge/filtering.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace tsforge {

namespace {

constexpr double kKeyScale = 1e4;

double squared_norm(const RowVector& row, const ChannelSpan& span) { return row.segment(span.start, span.width).squaredNorm(); }

long long rounded_key(double v) { return std::llround(v * kKeyScale); }

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

NormBounds norm_bounds(std::span<const double> norms) {
  if (norms.size() < 4) throw DataError("norm_bounds needs at least 4 values");
  const Eigen::Map<const Vector> view(norms.data(), static_cast<Index>(norms.size()));
  const double q1 = quantile_linear(view, 0.25);
  const double q3 = quantile_linear(view, 0.75);
  const double iqr = q3 - q1;
  return {q1 - 3.0 * iqr, q3 + 3.0 * iqr};
}

std::string to_string(Rejection r) {
  switch (r) {
    case Rejection::Missing: return "missing";
    case Rejection::Duplicate: return "duplicate";
    case Rejection::Norm: return "norm";
  }
  return "?";
}

RowKey row_key(const RowVector& row) {
  RowKey key(static_cast<std::size_t>(row.size()));
  for (Index j = 0; j < row.size(); ++j) key[static_cast<std::size_t>(j)] = rounded_key(row(j));
  return key;
}

FilterState::FilterState(const EmbeddingTable& original)
    : spans_(original.spans), features_(original.cols()), norms_(original.spans.size()),
      generated_norms_(original.spans.size()) {
  if (spans_.empty()) spans_.push_back({"all", 0, features_});
  norms_.resize(spans_.size());
  generated_norms_.resize(spans_.size());
  for (Index i = 0; i < original.rows(); ++i) {
    const RowVector row = original.values.row(i);
    keys_.insert(row_key(row));
    for (std::size_t c = 0; c < spans_.size(); ++c) norms_[c].push_back(squared_norm(row, spans_[c]));
  }
}

Matrix FilterState::accepted_table() const {
  Matrix m(static_cast<Index>(accepted_.size()), features_);
  for (std::size_t i = 0; i < accepted_.size(); ++i) m.row(static_cast<Index>(i)) = accepted_[i];
  return m;
}

BatchDisposition filter_batch(const std::vector<ParsedRow>& rows, FilterState& state) {
  const std::size_t channels = state.spans_.size();
  BatchDisposition out;
  out.channel_stats.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) out.channel_stats[c].bounds = norm_bounds(state.norms_[c]);

  std::vector<std::vector<double>> accepted_norms(channels), rejected_norms(channels);
  for (const ParsedRow& parsed : rows) {
    if (static_cast<Index>(parsed.values.size()) != state.features_ || !parsed.complete()) {
      out.outcome.emplace_back(Rejection::Missing);
      ++out.counts.missing;
      continue;
    }
    const RowVector row = parsed.to_row();
    RowKey key = row_key(row);
    if (state.keys_.contains(key)) {
      out.outcome.emplace_back(Rejection::Duplicate);
      ++out.counts.duplicate;
      continue;
    }
    std::vector<double> norms(channels);
    bool inside = true;
    for (std::size_t c = 0; c < channels; ++c) {
      norms[c] = squared_norm(row, state.spans_[c]);
      inside = inside && out.channel_stats[c].bounds.contains(norms[c]);
    }
    if (!inside) {
      out.outcome.emplace_back(Rejection::Norm);
      ++out.counts.norm;
      for (std::size_t c = 0; c < channels; ++c) rejected_norms[c].push_back(norms[c]);
      continue;
    }
    out.outcome.emplace_back(std::nullopt);
    ++out.counts.accepted;
    state.keys_.insert(std::move(key));
    for (std::size_t c = 0; c < channels; ++c) {
      state.norms_[c].push_back(norms[c]);
      state.generated_norms_[c].push_back(norms[c]);
      accepted_norms[c].push_back(norms[c]);
    }
    state.accepted_.push_back(row);
    out.accepted.push_back(row);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    out.channel_stats[c].accepted_mean = mean_or_nan(accepted_norms[c]);
    out.channel_stats[c].rejected_mean = mean_or_nan(rejected_norms[c]);
  }
  state.counters_.missing += out.counts.missing;
  state.counters_.duplicate += out.counts.duplicate;
  state.counters_.norm += out.counts.norm;
  state.counters_.accepted += out.counts.accepted;
  return out;
}

std::vector<double> diversity_score(const FilterState& state) {
  std::vector<double> out;
  const Index accepted = state.accepted_count();
  for (const auto& norms : state.generated_norms()) {
    if (accepted == 0) {
      out.push_back(1.0);
      continue;
    }
    std::unordered_set<long long> unique;
    for (const double n : norms) unique.insert(rounded_key(n));
    out.push_back(static_cast<double>(unique.size()) / static_cast<double>(accepted));
  }
  return out;
}

std::string to_string(StopDecision d) {
  switch (d) {
    case StopDecision::Continue: return "continue";
    case StopDecision::Collapse: return "stop-collapse";
    case StopDecision::Cap: return "stop-cap";
    case StopDecision::Target: return "stop-target";
  }
  return "?";
}

StopParams StopParams::for_target(Index target) {
  StopParams p;
  p.target = target;
  p.max_accepted = 10 * target;
  return p;
}

StopDecision should_stop(std::span<const double> diversity, Index accepted, const StopParams& params) {
  if (params.target && accepted >= *params.target) return StopDecision::Target;
  if (accepted > 0 && !diversity.empty() &&
      *std::max_element(diversity.begin(), diversity.end()) < params.lambda_stop)
    return StopDecision::Collapse;
  if (accepted > params.max_accepted) return StopDecision::Cap;
  return StopDecision::Continue;
}

StopDecision should_stop(const FilterState& state, const StopParams& params) {
  const auto d = diversity_score(state);
  return should_stop(d, state.accepted_count(), params);
}

}  // namespace tsforge
