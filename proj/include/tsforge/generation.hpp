#ifndef TSFORGE_GENERATION_HPP
#define TSFORGE_GENERATION_HPP

#include "tsforge/backend.hpp"
#include "tsforge/filtering.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsforge {

struct GenerationSettings {
  SamplingParams sampling;
  StopParams stop = StopParams::for_target(100);
  /// Guard against a backend whose output is always rejected.
  Index max_batches = 1000;
  PromptTemplate prompt;
  std::uint64_t seed = 0;
};

struct BatchLog {
  Index step = 0;
  Index requested = 0;
  FilterCounters counts;
  std::vector<double> diversity;
  std::vector<ChannelNormStats> norm_stats;
};

struct GenerationResult {
  EmbeddingTable table;
  std::vector<BatchLog> log;
  /// stop-target, stop-collapse, stop-cap or step-limit.
  std::string stop_reason;
  FilterCounters totals;
  std::vector<std::string> completions;
};

/// Prompt, generate, parse and filter batches of G rows until the stopping rule fires. In
/// fixed-count mode the last batch only asks for the rows still missing.
GenerationResult generate_filtered(const GeneratorBackend& backend, const BackendHandle& handle,
                                   const EmbeddingTable& original, const GenerationSettings& settings);

/// One JSON object per line: {step, G, accepted, rejected_missing, rejected_dup, rejected_norm, diversity}.
std::string to_jsonl(const std::vector<BatchLog>& log);

/// Independent, reproducible child seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace tsforge

#endif  // TSFORGE_GENERATION_HPP
