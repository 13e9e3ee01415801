#include "tsforge/text_codec.hpp"

#include "support.hpp"

#include <doctest.h>

#include <map>

using namespace testing;

namespace {

const std::string kPrompt1 =
    "Input: value_2 is [blank], value_4 is [blank], value_1 is [blank], value_3 is [blank] [sep] Target: 0.125 "
    "[answer] -0.084 [answer] 0.217 [answer] 0.041 [answer]";
const std::string kPrompt3 =
    "Input: value_1 is [blank], value_3 is [blank], value_2 is [blank], value_4 is [blank] [sep] Target: 0.182 "
    "[answer] 0.095 [answer] -0.012 [answer]";

}  // namespace

TEST_CASE("sample_permutation") {
  std::mt19937_64 rng(1);
  CHECK(sample_permutation(1, rng) == Permutation{0});

  std::mt19937_64 a(77), b(77);
  CHECK(sample_permutation(4, a) == sample_permutation(4, b));

  std::mt19937_64 r(2024);
  std::map<Permutation, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_permutation(3, r)];
  CHECK(counts.size() == 6);
  for (const auto& [perm, n] : counts) CHECK(std::abs(n / static_cast<double>(draws) - 1.0 / 6.0) < 0.05 / 6.0);

  CHECK_THROWS_AS(sample_permutation(0, r), DataError);
}

TEST_CASE("encode_finetune layout") {
  const std::vector<double> row{1.5, -2.25};
  CHECK(encode_finetune(row, {1, 0}) ==
        "Input: value_2 is [blank], value_1 is [blank] [sep] Target: -2.2500 [answer] 1.5000 [answer]");

  PromptTemplate cond;
  cond.condition = "temp";
  CHECK(encode_finetune(row, {0, 1}, cond) ==
        "Condition: data is temp [sep] Input: value_1 is [blank], value_2 is [blank] [sep] Target: 1.5000 [answer] "
        "-2.2500 [answer]");

  // the stored row in canonical order, written under Prompt 1's permutation
  const std::vector<double> prompt1_row{0.217, 0.125, 0.041, -0.084};
  CHECK(encode_finetune(prompt1_row, {1, 3, 0, 2}) ==
        "Input: value_2 is [blank], value_4 is [blank], value_1 is [blank], value_3 is [blank] [sep] Target: 0.1250 "
        "[answer] -0.0840 [answer] 0.2170 [answer] 0.0410 [answer]");

  CHECK_THROWS_AS(encode_finetune(row, {0, 0}), DataError);
  CHECK_THROWS_AS(encode_finetune(row, {0}), DataError);
  CHECK_THROWS_AS(encode_finetune(std::vector<double>{NAN, 1.0}, {0, 1}), DataError);
}

TEST_CASE("format_value") {
  CHECK(format_value(0.12345, 4) == "0.1235");
  CHECK(format_value(-0.00001, 4) == "0.0000");
  CHECK(format_value(-1.0, 2) == "-1.00");
  CHECK(format_value(12.0, 4) == "12.0000");
}

TEST_CASE("make_inference_prompt") {
  CHECK(make_inference_prompt(2, {0, 1}) == "Input: value_1 is [blank], value_2 is [blank] [sep] Target:");
  PromptTemplate cond;
  cond.condition = "cnt";
  CHECK(make_inference_prompt(1, {0}, cond) == "Condition: data is cnt [sep] Input: value_1 is [blank] [sep] Target:");

  const Permutation perm{2, 0, 1};
  const std::string text = make_inference_prompt(3, perm) + " 1.0 [answer] 2.0 [answer] 3.0 [answer]";
  const ParsedRow parsed = parse_generation(text, 3);
  CHECK(parsed.permutation == perm);
  CHECK(parsed.values[2] == 1.0);
  CHECK(parsed.values[0] == 2.0);
  CHECK(parsed.values[1] == 3.0);
}

TEST_CASE("parse reference prompts") {
  const ParsedRow p1 = parse_generation(kPrompt1, 4);
  REQUIRE(p1.complete());
  CHECK(*p1.values[0] == 0.217);
  CHECK(*p1.values[1] == 0.125);
  CHECK(*p1.values[2] == 0.041);
  CHECK(*p1.values[3] == -0.084);
  CHECK(p1.permutation == Permutation{1, 3, 0, 2});
  CHECK_FALSE(p1.condition.has_value());

  const ParsedRow p3 = parse_generation(kPrompt3, 4);
  CHECK(p3.missing_count() == 1);
  CHECK_FALSE(p3.values[3].has_value());
  CHECK(*p3.values[0] == 0.182);
  CHECK(*p3.values[2] == 0.095);
  CHECK(*p3.values[1] == -0.012);
  CHECK(std::isnan(p3.to_row()(3)));
}

TEST_CASE("parse robustness") {
  const std::string garbage = "Input: value_1 is [blank], value_2 is [blank], value_3 is [blank] [sep] Target: 1.0 "
                              "[answer] banana [answer] 3.0 [answer]";
  const ParsedRow g = parse_generation(garbage, 3);
  CHECK(g.values[0] == 1.0);
  CHECK_FALSE(g.values[1].has_value());
  CHECK(g.values[2] == 3.0);

  // unterminated trailing fragment does not count
  const ParsedRow cut = parse_generation("Input: value_1 is [blank], value_2 is [blank] [sep] Target: 1.0 [answer] 2.0", 2);
  CHECK(cut.missing_count() == 1);

  // unknown and repeated feature ids become missing
  const ParsedRow bad = parse_generation(
      "Input: value_1 is [blank], value_1 is [blank], value_9 is [blank] [sep] Target: 1 [answer] 2 [answer] 3 [answer]", 3);
  CHECK(bad.values[0] == 1.0);
  CHECK(bad.missing_count() == 2);

  // extra answers beyond K are ignored
  const ParsedRow extra = parse_generation("Input: value_1 is [blank] [sep] Target: 4 [answer] 5 [answer]", 1);
  CHECK(extra.values[0] == 4.0);

  CHECK(parse_generation("no structure at all", 2).missing_count() == 2);

  const ParsedRow c = parse_generation("Condition: data is hum [sep] Input: value_1 is [blank] [sep] Target: 7 [answer]", 1);
  CHECK(c.condition == "hum");
  CHECK(c.values[0] == 7.0);
}

TEST_CASE("codec round trip at four decimals") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 3.0);
  for (const Index k : {1, 3, 9}) {
    for (int trial = 0; trial < 50; ++trial) {
      RowVector row(k);
      for (Index j = 0; j < k; ++j) row(j) = std::round(n(rng) * 1e4) / 1e4;
      PromptTemplate t;
      if (trial % 2) t.condition = "ch" + std::to_string(trial);
      const Permutation perm = sample_permutation(k, rng);
      const ParsedRow back = parse_generation(encode_finetune(row, perm, t), k, t);
      REQUIRE(back.complete());
      CHECK((back.to_row() - row).cwiseAbs().maxCoeff() < 5e-5);
      CHECK(back.permutation == perm);
      CHECK(back.condition == t.condition);
    }
  }
}

TEST_CASE("corpus files") {
  TempDir dir;
  const std::vector<std::string> prompts{"a b c", "Input: value_1 is [blank] [sep] Target: 1.0000 [answer]"};
  write_corpus(dir / "c.txt", prompts);
  CHECK(read_corpus(dir / "c.txt") == prompts);
  CHECK_THROWS_AS(write_corpus(dir / "d.txt", {"two\nlines"}), DataError);
  CHECK_THROWS_AS(read_corpus(dir / "absent.txt"), DataError);
}
