#ifndef TSFORGE_SEGMENTATION_HPP
#define TSFORGE_SEGMENTATION_HPP

#include "tsforge/core_data.hpp"

#include <optional>

namespace tsforge {

/// Raised when no autocorrelation peak clears the significance band.
class NoPeriodicity : public Error {
public:
  using Error::Error;
};

/// Mean-removed autocorrelation normalized by the total sum of squares (biased estimator),
/// lags 0..max_lag. Throws DataError for a constant series.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> autocorrelation(
    const Eigen::MatrixBase<Derived>& series, Index max_lag) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Index n = series.size();
  if (max_lag < 0 || max_lag >= n) throw DataError("autocorrelation: max_lag must be in [0, n)");
  const Vec centered = series.reshaped().array() - series.mean();
  const Scalar total = centered.squaredNorm();
  if (!(total > Scalar(0))) throw DataError("autocorrelation: zero variance");
  Vec acf(max_lag + 1);
  for (Index lag = 0; lag <= max_lag; ++lag)
    acf(lag) = centered.head(n - lag).dot(centered.tail(n - lag)) / total;
  return acf;
}

/// Lag scan and significance band used by estimate_period.
struct PeriodSearch {
  Index max_lag = 0;
  double threshold = 0.0;
};

/// Lags up to min((L-1)/2, L0/2) so every candidate satisfies P < L/2; the band is the
/// white-noise bound z/sqrt(L0), Bonferroni-corrected over the scanned lags at 5%.
PeriodSearch period_search(Index series_length, Index window_length);

/// Highest significant local ACF maximum with 2 <= lag < L/2.
Index estimate_period(const Vector& series, Index window_length);

struct PeriodEstimate {
  Index period = 0;
  double peak = 0.0;
};

/// Like estimate_period but also reports the peak height; nullopt instead of throwing.
std::optional<PeriodEstimate> find_period(const Vector& series, Index window_length);

struct SegmentationPlan {
  Index length = 0;     // window length L
  Index instances = 0;  // window count I
  std::optional<Index> period;
  Index raw_step = 0;   // max(1, floor((L0 - L) / (I - 1)))
  Index step = 0;       // after period adjustment
  std::vector<Index> offsets;
};

/// Step size aligned to the period: nearest multiple of P (ties go low); if that overflows,
/// the largest fitting multiple; otherwise the raw step.
Index adjust_step(Index raw_step, std::optional<Index> period, Index series_length, Index window_length,
                  Index instances);

struct SegmentOptions {
  /// Fixed period; when empty it is estimated from the data.
  std::optional<Index> period;
  bool detect_period = true;
};

struct Segmentation {
  InstanceSet windows;
  SegmentationPlan plan;
};

Segmentation segment(const RawSeries& series, Index length, Index instances, const SegmentOptions& opts = {});

}  // namespace tsforge

#endif  // TSFORGE_SEGMENTATION_HPP
