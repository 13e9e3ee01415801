#include "tsforge/filtering.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace testing;

namespace {

const std::string kPrompt1 =
    "Input: value_2 is [blank], value_4 is [blank], value_1 is [blank], value_3 is [blank] [sep] Target: 0.125 "
    "[answer] -0.084 [answer] 0.217 [answer] 0.041 [answer]";
const std::string kPrompt2 =
    "Input: value_4 is [blank], value_1 is [blank], value_2 is [blank], value_3 is [blank] [sep] Target:  -0.084 "
    "[answer] 0.217 [answer] 0.125 [answer] 0.041 [answer]";
const std::string kPrompt3 =
    "Input: value_1 is [blank], value_3 is [blank], value_2 is [blank], value_4 is [blank] [sep] Target: 0.182 "
    "[answer] 0.095 [answer] -0.012 [answer]";

EmbeddingTable table(const Matrix& values, std::vector<ChannelSpan> spans = {}) {
  EmbeddingTable t;
  t.values = values;
  t.spans = spans.empty() ? std::vector<ChannelSpan>{{"x", 0, values.cols()}} : std::move(spans);
  return t;
}

ParsedRow complete_row(const RowVector& r) {
  ParsedRow p;
  for (Index j = 0; j < r.size(); ++j) p.values.emplace_back(r(j));
  return p;
}

// Textbook quartiles: sort, then interpolate at p * (n - 1).
double quartile_oracle(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - std::floor(h)) * (v[i + 1] - v[i]);
}

}  // namespace

TEST_CASE("norm_bounds from linear-interpolation quartiles") {
  const std::vector<double> norms{1, 2, 3, 4, 5};
  const NormBounds b = norm_bounds(norms);
  CHECK(b.lo == doctest::Approx(-4.0));
  CHECK(b.hi == doctest::Approx(10.0));
  CHECK(b.contains(10.0));
  CHECK_FALSE(b.contains(10.0001));

  const std::vector<double> same(6, 2.5);
  const NormBounds flat = norm_bounds(same);
  CHECK(flat.lo == 2.5);
  CHECK(flat.hi == 2.5);
  CHECK(flat.contains(2.5));
  CHECK_FALSE(flat.contains(2.5000001));

  CHECK_THROWS_AS(norm_bounds(std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("quartiles never decrease when a larger norm arrives") {
  std::mt19937_64 rng(17);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(4 + trial % 25));
    for (auto& x : v) x = e(rng);
    const double q1 = quartile_oracle(v, 0.25), q3 = quartile_oracle(v, 0.75);
    const Eigen::Map<const Vector> view(v.data(), static_cast<Index>(v.size()));
    CHECK(quantile_linear(view, 0.25) == doctest::Approx(q1));
    CHECK(quantile_linear(view, 0.75) == doctest::Approx(q3));
    v.push_back(*std::max_element(v.begin(), v.end()) + e(rng));
    CHECK(quartile_oracle(v, 0.25) >= q1);
    CHECK(quartile_oracle(v, 0.75) >= q3);
  }
  // The bounds themselves are not monotone: a new maximum can collapse the IQR.
  const NormBounds before = norm_bounds(std::vector<double>{0, 1, 1, 1});
  const NormBounds after = norm_bounds(std::vector<double>{0, 1, 1, 1, 2});
  CHECK(before.hi == doctest::Approx(1.75));
  CHECK(after.hi == doctest::Approx(1.0));
}

TEST_CASE("reference prompts: duplicate and missing rejections") {
  std::mt19937_64 rng(4);
  const FilterState seed_state(table(gaussian(30, 4, rng, 0.13)));
  FilterState state = seed_state;
  std::vector<ParsedRow> batch{parse_generation(kPrompt1, 4), parse_generation(kPrompt2, 4),
                               parse_generation(kPrompt3, 4)};
  const BatchDisposition d = filter_batch(batch, state);
  CHECK_FALSE(d.outcome[0].has_value());
  CHECK(d.outcome[1] == Rejection::Duplicate);
  CHECK(d.outcome[2] == Rejection::Missing);
  CHECK(d.counts.accepted == 1);
  REQUIRE(state.accepted_rows().size() == 1);
  CHECK(state.accepted_rows()[0](0) == 0.217);
  CHECK(state.seen(state.accepted_rows()[0]));
}

TEST_CASE("duplicates of original rows are rejected") {
  Matrix o(6, 2);
  o << 1, 2, 2, 1, 1.5, 1.5, 0.5, 2.2, 2.1, 0.7, 1.2, 1.9;
  FilterState state(table(o));
  RowVector near(2);
  near << 1.00004, 2.0;  // rounds onto the first original row
  RowVector fresh(2);
  fresh << 1.0002, 2.0;
  const BatchDisposition d = filter_batch({complete_row(near), complete_row(fresh)}, state);
  CHECK(d.outcome[0] == Rejection::Duplicate);
  CHECK_FALSE(d.outcome[1].has_value());
}

TEST_CASE("norm outlier is rejected") {
  // originals with squared norms spread around 1.708
  Matrix o(20, 2);
  for (Index i = 0; i < 20; ++i) {
    const double n = 1.0 + 1.416 * static_cast<double>(i) / 19.0;
    o(i, 0) = std::sqrt(n / 2);
    o(i, 1) = -std::sqrt(n / 2);
  }
  FilterState state(table(o));
  double mean = 0;
  for (const double n : state.norms()[0]) mean += n / 20.0;
  CHECK(mean == doctest::Approx(1.708));
  RowVector far(2);
  far << std::sqrt(19.1), 0.0;
  RowVector ok(2);
  ok << 1.3, 0.0;
  const BatchDisposition d = filter_batch({complete_row(far), complete_row(ok)}, state);
  CHECK(d.outcome[0] == Rejection::Norm);
  CHECK_FALSE(d.outcome[1].has_value());
  CHECK(d.channel_stats[0].rejected_mean == doctest::Approx(19.1));
  CHECK(d.channel_stats[0].accepted_mean == doctest::Approx(1.69));
}

TEST_CASE("a row must pass every channel") {
  Matrix o(8, 4);
  for (Index i = 0; i < 8; ++i) o.row(i) << 1 + 0.1 * i, 0, 1 - 0.05 * i, 0;
  FilterState state(table(o, {{"a", 0, 2}, {"b", 2, 2}}));
  RowVector bad_b(4);
  bad_b << 1.2, 0, 30, 0;
  RowVector good(4);
  good << 1.21, 0, 0.8, 0;
  const BatchDisposition d = filter_batch({complete_row(bad_b), complete_row(good)}, state);
  CHECK(d.outcome[0] == Rejection::Norm);
  CHECK_FALSE(d.outcome[1].has_value());
  CHECK(state.norms()[1].size() == 9);
}

TEST_CASE("bounds are fixed for the whole batch") {
  Matrix o(4, 1);
  o << 1, 1, 1, 1;  // bounds (1, 1)
  FilterState state(table(o));
  RowVector two(1);
  two << std::sqrt(2.0);
  const BatchDisposition d = filter_batch({complete_row(two)}, state);
  CHECK(d.outcome[0] == Rejection::Norm);
  CHECK(d.channel_stats[0].bounds.lo == 1.0);
}

TEST_CASE("diversity score") {
  Matrix o(8, 2);
  for (Index i = 0; i < 8; ++i) o.row(i) << 0.5 + 0.2 * i, 0.0;
  FilterState state(table(o));
  CHECK(diversity_score(state) == std::vector<double>{1.0});

  // squared norms 1.00001, 1.00002 and 2.0 with distinct row keys
  RowVector a(2), b(2), c(2);
  a << 1.0, std::sqrt(0.00001);
  b << std::sqrt(1.00002), 0.0;
  c << std::sqrt(2.0), 0.0;
  const BatchDisposition d = filter_batch({complete_row(a), complete_row(b), complete_row(c)}, state);
  REQUIRE(d.counts.accepted == 3);
  CHECK(diversity_score(state).front() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("diversity of identical and distinct norms") {
  Matrix o(10, 2);
  for (Index i = 0; i < 10; ++i) o.row(i) << 1.0 + 0.01 * i, 0.0;
  FilterState collapsed(table(o));
  std::vector<ParsedRow> same;
  for (int i = 0; i < 10; ++i) {
    const double angle = 0.1 * (i + 1);  // angle 0 would repeat original row 2
    RowVector r(2);
    r << 1.02 * std::cos(angle), 1.02 * std::sin(angle);
    same.push_back(complete_row(r));
  }
  REQUIRE(filter_batch(same, collapsed).counts.accepted == 10);
  CHECK(diversity_score(collapsed).front() == doctest::Approx(0.1));

  FilterState distinct(table(o));
  std::vector<ParsedRow> spread;
  for (int i = 0; i < 10; ++i) {
    RowVector r(2);
    r << 1.0 + 0.0071 * i, 0.001;
    spread.push_back(complete_row(r));
  }
  REQUIRE(filter_batch(spread, distinct).counts.accepted == 10);
  CHECK(diversity_score(distinct).front() == 1.0);
}

TEST_CASE("stopping rule order") {
  StopParams p;
  p.lambda_stop = 0.1;
  p.max_accepted = 50;
  const std::vector<double> low{0.05, 0.08}, high{0.5, 0.08};
  CHECK(should_stop(low, 10, p) == StopDecision::Collapse);
  CHECK(should_stop(high, 10, p) == StopDecision::Continue);
  CHECK(should_stop(high, 51, p) == StopDecision::Cap);
  CHECK(should_stop(high, 50, p) == StopDecision::Continue);
  p.target = 100;
  CHECK(should_stop(high, 100, p) == StopDecision::Target);
  CHECK(should_stop(low, 100, p) == StopDecision::Target);
  CHECK(to_string(StopDecision::Collapse) == "stop-collapse");
  CHECK(to_string(StopDecision::Target) == "stop-target");
  CHECK(to_string(StopDecision::Cap) == "stop-cap");

  const StopParams t = StopParams::for_target(100);
  CHECK(t.max_accepted == 1000);
  CHECK(t.lambda_stop == 0.1);
}

TEST_CASE("counters accumulate across batches") {
  std::mt19937_64 rng(8);
  FilterState state(table(gaussian(20, 3, rng)));
  ParsedRow missing;
  missing.values = {1.0, std::nullopt, 2.0};
  for (int batch = 0; batch < 3; ++batch) {
    const RowVector r = gaussian(1, 3, rng) * 0.5;
    filter_batch({missing, complete_row(r), complete_row(r)}, state);
  }
  CHECK(state.counters().missing == 3);
  CHECK(state.counters().duplicate == 3);
  CHECK(state.counters().accepted == 3);
  CHECK(state.accepted_table().rows() == 3);
  CHECK(state.norms()[0].size() == 23);
}
