#include "tsforge/segmentation.hpp"

#include "normal.hpp"

#include <algorithm>
#include <cmath>

namespace tsforge {

PeriodSearch period_search(Index series_length, Index window_length) {
  PeriodSearch s;
  s.max_lag = std::min((window_length - 1) / 2, series_length / 2);
  const double tests = static_cast<double>(std::max<Index>(s.max_lag - 2, 1));
  const double z = detail::normal_quantile(1.0 - 0.05 / (2.0 * tests));
  s.threshold = z / std::sqrt(static_cast<double>(series_length));
  return s;
}

std::optional<PeriodEstimate> find_period(const Vector& series, Index window_length) {
  const PeriodSearch search = period_search(series.size(), window_length);
  // a local maximum at lag t needs lag t + 1 as well
  if (search.max_lag < 3) return std::nullopt;
  const Vector acf = autocorrelation(series, search.max_lag);
  std::optional<PeriodEstimate> best;
  for (Index lag = 2; lag < search.max_lag; ++lag) {
    const double v = acf(lag);
    if (v > acf(lag - 1) && v >= acf(lag + 1) && v > search.threshold && (!best || v > best->peak))
      best = PeriodEstimate{lag, v};
  }
  return best;
}

Index estimate_period(const Vector& series, Index window_length) {
  const auto est = find_period(series, window_length);
  if (!est) throw NoPeriodicity("no significant autocorrelation peak below L/2");
  return est->period;
}

Index adjust_step(Index raw_step, std::optional<Index> period, Index series_length, Index window_length,
                  Index instances) {
  if (!period || *period < 1) return raw_step;
  const Index p = *period;
  const Index lower = (raw_step / p) * p;
  const Index upper = lower + p;
  const Index nearest = (lower == 0 || raw_step - lower > upper - raw_step) ? upper : lower;
  const auto fits = [&](Index s) { return (instances - 1) * s + window_length <= series_length; };
  if (fits(nearest)) return nearest;
  const Index largest = ((series_length - window_length) / (instances - 1)) / p * p;
  if (largest >= p) return largest;
  return raw_step;
}

Segmentation segment(const RawSeries& series, Index length, Index instances, const SegmentOptions& opts) {
  series.validate();
  const Index total = series.length();
  if (instances < 2) throw DataError("segment: need at least 2 instances");
  if (length < 2) throw DataError("segment: window length must be >= 2");
  if (length >= total) throw DataError("segment: window length must be shorter than the series");
  if ((instances - 1) + length > total)
    throw DataError("segment: " + std::to_string(instances) + " windows of length " + std::to_string(length) +
                    " do not fit in " + std::to_string(total) + " samples");

  SegmentationPlan plan;
  plan.length = length;
  plan.instances = instances;
  plan.raw_step = std::max<Index>(1, (total - length) / (instances - 1));

  if (opts.period) {
    plan.period = *opts.period;
  } else if (opts.detect_period) {
    std::optional<PeriodEstimate> best;
    for (const auto& ch : series.channels) {
      std::optional<PeriodEstimate> est;
      try {
        est = find_period(ch.values, length);
      } catch (const DataError&) {
        // constant channel carries no periodicity
      }
      if (est && (!best || est->peak > best->peak)) best = est;
    }
    if (best) plan.period = best->period;
  }

  plan.step = adjust_step(plan.raw_step, plan.period, total, length, instances);
  for (Index i = 0; i < instances; ++i) plan.offsets.push_back(i * plan.step);

  std::vector<Matrix> channels;
  std::vector<std::string> names;
  for (const auto& ch : series.channels) {
    Matrix w(instances, length);
    for (Index i = 0; i < instances; ++i) w.row(i) = ch.values.segment(plan.offsets[static_cast<std::size_t>(i)], length).transpose();
    channels.push_back(std::move(w));
    names.push_back(ch.name);
  }
  return {InstanceSet(std::move(channels), std::move(names), plan.offsets), std::move(plan)};
}

}  // namespace tsforge
