#ifndef TSFORGE_TEXT_CODEC_HPP
#define TSFORGE_TEXT_CODEC_HPP

#include "tsforge/core_data.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tsforge {

/// Zero-based feature order; feature p is rendered as value_{p+1}.
using Permutation = std::vector<Index>;

struct PromptTemplate {
  int precision = 4;
  std::optional<std::string> condition;
  std::string blank = "[blank]";
  std::string sep = "[sep]";
  std::string answer = "[answer]";

  void validate() const;
};

struct ParsedRow {
  std::vector<std::optional<double>> values;
  std::string source_text;
  std::optional<Permutation> permutation;  // as read from the Input section
  std::optional<std::string> condition;

  bool complete() const;
  std::size_t missing_count() const;
  /// Missing entries become NaN.
  RowVector to_row() const;
};

Permutation sample_permutation(Index k, std::mt19937_64& rng);

/// Fixed-point rendering without exponent; "-0.0000" is written as "0.0000".
std::string format_value(double v, int precision);

/// "Input: value_a is [blank], ... [sep] Target: v_a [answer] ..." with an optional
/// "Condition: data is <label> [sep] " prefix.
std::string encode_finetune(std::span<const double> row, const Permutation& perm, const PromptTemplate& tmpl = {});
std::string encode_finetune(const RowVector& row, const Permutation& perm, const PromptTemplate& tmpl = {});

/// The fine-tune prompt cut after "Target:".
std::string make_inference_prompt(Index k, const Permutation& perm, const PromptTemplate& tmpl = {});

/// Values are split on the answer token and mapped back to canonical positions through the
/// feature ids of the Input section (or `fallback` / identity for a bare completion). Missing,
/// unparseable or unknown entries come back empty; nothing throws.
ParsedRow parse_generation(const std::string& text, Index k, const PromptTemplate& tmpl = {},
                           const std::optional<Permutation>& fallback = std::nullopt);

/// One prompt per line, control tokens literal.
void write_corpus(const std::filesystem::path& path, const std::vector<std::string>& prompts);
std::vector<std::string> read_corpus(const std::filesystem::path& path);

}  // namespace tsforge

#endif  // TSFORGE_TEXT_CODEC_HPP
