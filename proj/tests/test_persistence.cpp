#include "tsforge/persistence.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace testing;

TEST_CASE("windows round trip bit-exactly") {
  TempDir dir;
  std::mt19937_64 rng(1);
  const InstanceSet x({gaussian(5, 7, rng), gaussian(5, 7, rng) * 1e-7}, {"temp", "rel hum"}, {0, 3, 6, 9, 12});
  write_windows(dir / "w", x);
  CHECK(std::filesystem::exists(dir / "w" / "rel_hum.csv"));
  const InstanceSet back = read_windows(dir / "w");
  CHECK(back.channel_names() == x.channel_names());
  CHECK(back.origin_offsets() == x.origin_offsets());
  CHECK(back.channel(0) == x.channel(0));
  CHECK(back.channel(1) == x.channel(1));
}

TEST_CASE("bare directory of channel CSVs") {
  TempDir dir;
  std::filesystem::create_directories(dir / "w");
  write_file(dir / "w" / "b.csv", "t0,t1\n1,2\n3,4\n");
  write_file(dir / "w" / "a.csv", "t0,t1\n5,6\n7,8\n");
  const InstanceSet x = read_windows(dir / "w");
  CHECK(x.channel_names() == std::vector<std::string>{"a", "b"});
  CHECK(x.channel(1)(1, 0) == 3.0);

  CHECK_THROWS_WITH_AS(read_windows(dir / "none"), doctest::Contains("none"), DataError);
  std::filesystem::create_directories(dir / "empty");
  CHECK_THROWS_AS(read_windows(dir / "empty"), DataError);
  write_file(dir / "w" / "c.csv", "t0,t1,t2\n1,2,3\n4,5,6\n");
  CHECK_THROWS_AS(read_windows(dir / "w"), DataError);
}

TEST_CASE("plan and scaler round trip") {
  TempDir dir;
  SegmentationPlan p;
  p.length = 250;
  p.instances = 3;
  p.period = 24;
  p.raw_step = 60;
  p.step = 48;
  p.offsets = {0, 48, 96};
  write_plan(dir / "plan.json", p);
  const SegmentationPlan q = read_plan(dir / "plan.json");
  CHECK(q.period == 24);
  CHECK(q.offsets == p.offsets);
  CHECK(q.step == 48);

  p.period.reset();
  write_plan(dir / "plan2.json", p);
  CHECK_FALSE(read_plan(dir / "plan2.json").period.has_value());

  std::mt19937_64 rng(2);
  const ScalerState s = fit_scaler(InstanceSet({gaussian(4, 6, rng)}, {"a"}));
  write_scaler(dir / "s.json", s);
  const ScalerState t = read_scaler(dir / "s.json");
  CHECK(t.mean[0] == s.mean[0]);
  CHECK(t.std[0] == s.std[0]);
  CHECK(t.channel_names == s.channel_names);
}

TEST_CASE("basis round trip keeps the method and shared flag") {
  TempDir dir;
  std::mt19937_64 rng(3);
  const InstanceSet x({gaussian(10, 30, rng), gaussian(10, 30, rng)}, {"a", "b"});
  for (const bool shared : {false, true}) {
    const BasisSystem b = shared ? fit_shared_basis(x, BasisMethod::FICA, 3) : fit_basis(x, BasisMethod::FPC, {2, 3});
    write_basis(dir / "b.json", b);
    const BasisSystem r = read_basis(dir / "b.json");
    CHECK(r.method == b.method);
    CHECK(r.shared == shared);
    REQUIRE(r.channels.size() == 2);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(r.channels[c].name == b.channels[c].name);
      CHECK(r.channels[c].basis == b.channels[c].basis);
      CHECK(r.channels[c].mean_curve == b.channels[c].mean_curve);
    }
    CHECK(embed(x, r).values == embed(x, b).values);
  }
}

TEST_CASE("table round trip with its sidecar") {
  TempDir dir;
  std::mt19937_64 rng(4);
  EmbeddingTable t;
  t.values = gaussian(6, 5, rng);
  t.spans = {{"a", 0, 2}, {"b", 2, 3}};
  t.row_ids = {0, 1, 2, 3, 4, 5};
  write_table(dir / "t" / "e.csv", t);
  CHECK(read_file(dir / "t" / "e.csv").rfind("value_1,value_2,value_3,value_4,value_5\n", 0) == 0);
  const EmbeddingTable r = read_table(dir / "t" / "e.csv");
  CHECK(r.values == t.values);
  CHECK(r.spans[1].start == 2);
  CHECK(r.spans[1].name == "b");
  CHECK(r.row_ids == t.row_ids);
  CHECK_THROWS_WITH_AS(read_table(dir / "missing.csv"), doctest::Contains("missing.csv"), DataError);
}
