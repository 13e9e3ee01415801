#include "tsforge/segmentation.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace testing;

namespace {

// Independent ACF: biased estimator written out as plain loops.
double acf_oracle(const Vector& x, Index lag) {
  const double mean = x.mean();
  double num = 0, den = 0;
  for (Index t = 0; t < x.size(); ++t) den += (x(t) - mean) * (x(t) - mean);
  for (Index t = 0; t + lag < x.size(); ++t) num += (x(t) - mean) * (x(t + lag) - mean);
  return num / den;
}

RawSeries single(const Vector& v) { return RawSeries{{Channel{"x", v}}, {}}; }

Vector white_noise(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian(n, 1, rng);
}

}  // namespace

TEST_CASE("autocorrelation matches a loop oracle") {
  const Vector x = white_noise(300, 1) + sinusoid(300, 17);
  const Vector acf = autocorrelation(x, 40);
  CHECK(acf(0) == doctest::Approx(1.0));
  for (Index lag = 0; lag <= 40; ++lag) CHECK(acf(lag) == doctest::Approx(acf_oracle(x, lag)).epsilon(1e-12));
}

TEST_CASE("sinusoid ACF peaks at its period") {
  const Vector acf = autocorrelation(sinusoid(480, 24), 120);
  Index best = -1;
  for (Index lag = 1; lag < 120; ++lag)
    if (acf(lag) > acf(lag - 1) && acf(lag) >= acf(lag + 1) && (best < 0 || acf(lag) > acf(best))) best = lag;
  CHECK(best == 24);
}

TEST_CASE("white noise ACF stays inside the 2/sqrt(n) band") {
  const Vector acf = autocorrelation(white_noise(10000, 42), 100);
  CHECK(acf.tail(100).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("constant series has no autocorrelation") {
  CHECK_THROWS_AS(autocorrelation(Vector::Constant(100, 3.0), 10), DataError);
  CHECK_THROWS_AS(estimate_period(Vector::Constant(100, 3.0), 50), DataError);
}

TEST_CASE("estimate_period") {
  CHECK(estimate_period(sinusoid(2000, 24), 250) == 24);
  // the slower, larger cycle dominates
  const Vector composite = sinusoid(2000, 24) + sinusoid(2000, 96, 3.0);
  CHECK(estimate_period(composite, 250) == 96);
  CHECK(estimate_period(sinusoid(2000, 24) + 0.3 * white_noise(2000, 9), 250) == 24);
}

TEST_CASE("i.i.d. noise raises NoPeriodicity") {
  int flagged = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    try {
      estimate_period(white_noise(2000, seed), 250);
      ++flagged;
    } catch (const NoPeriodicity&) {
    }
  }
  CHECK(flagged == 0);
}

TEST_CASE("period search window") {
  const PeriodSearch s = period_search(2000, 250);
  CHECK(s.max_lag == 124);
  CHECK(s.threshold > 2.0 / std::sqrt(2000.0));
  // periods at or beyond L/2 are out of reach
  CHECK_FALSE(find_period(sinusoid(2000, 200), 250).has_value());
}

TEST_CASE("adjust_step") {
  // tie between 48 and 72 goes low
  CHECK(adjust_step(60, 24, 2000, 250, 30) == 48);
  // 72 is nearer but 29 * 72 + 250 > 2000
  CHECK(adjust_step(65, 24, 2000, 250, 30) == 48);
  CHECK(adjust_step(70, 24, 5000, 250, 30) == 72);
  CHECK(adjust_step(60, std::nullopt, 2000, 250, 30) == 60);
  // nearest multiple (120) overflows, largest fitting multiple is 60
  CHECK(adjust_step(100, 60, 300, 100, 3) == 60);
  // no positive multiple fits, keep the raw step
  CHECK(adjust_step(100, 150, 300, 100, 3) == 100);
  // raw step below one period rounds up when that fits
  CHECK(adjust_step(10, 24, 2000, 250, 30) == 24);
}

TEST_CASE("segment reproduces the univariate protocol arithmetic") {
  const Vector x = sinusoid(2000, 24);
  const Segmentation seg = segment(single(x), 250, 30);
  CHECK(seg.plan.period == 24);
  CHECK(seg.plan.raw_step == 60);
  CHECK(seg.plan.step == 48);
  REQUIRE(seg.plan.offsets.size() == 30);
  CHECK(seg.plan.offsets.back() == 1392);
  CHECK(seg.windows.instances() == 30);
  CHECK(seg.windows.length() == 250);
  for (Index i = 0; i < 30; ++i) CHECK(seg.windows.channel(0).row(i) == x.segment(48 * i, 250).transpose());
}

TEST_CASE("segment without periodicity keeps the raw step") {
  const Segmentation seg = segment(single(white_noise(2000, 5)), 250, 30);
  CHECK_FALSE(seg.plan.period.has_value());
  CHECK(seg.plan.step == 60);
  CHECK(seg.plan.offsets[1] == 60);

  SegmentOptions off;
  off.detect_period = false;
  CHECK(segment(single(sinusoid(2000, 24)), 250, 30, off).plan.step == 60);

  SegmentOptions fixed;
  fixed.period = 50;
  CHECK(segment(single(white_noise(2000, 5)), 250, 30, fixed).plan.step == 50);
}

TEST_CASE("segment shares offsets across channels") {
  RawSeries s{{Channel{"a", white_noise(2000, 1)}, Channel{"b", sinusoid(2000, 24)}, Channel{"c", Vector::Ones(2000)}}, {}};
  const Segmentation seg = segment(s, 250, 30);
  CHECK(seg.plan.period == 24);
  CHECK(seg.windows.channels() == 3);
  CHECK(seg.windows.channel(2).isOnes());
  CHECK(seg.windows.channel(0).row(3) == s.channels[0].values.segment(seg.plan.offsets[3], 250).transpose());
}

TEST_CASE("segment preconditions") {
  const RawSeries s = single(sinusoid(300, 24));
  CHECK_THROWS_AS(segment(s, 250, 1), DataError);
  CHECK_THROWS_AS(segment(s, 300, 2), DataError);
  CHECK_THROWS_AS(segment(s, 250, 52), DataError);
  CHECK_NOTHROW(segment(s, 250, 51));
}
