#include "tsforge/generation.hpp"

#include <json.hpp>

#include <random>
#include <sstream>

namespace tsforge {

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : label) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GenerationResult generate_filtered(const GeneratorBackend& backend, const BackendHandle& handle,
                                   const EmbeddingTable& original, const GenerationSettings& settings) {
  settings.sampling.validate();
  const Index k = original.cols();
  std::mt19937_64 rng(derive_seed(settings.seed, "prompts"));
  FilterState state(original);
  GenerationResult out;
  out.stop_reason = "step-limit";

  if (settings.stop.target && *settings.stop.target <= 0) out.stop_reason = to_string(StopDecision::Target);
  for (Index step = 1; step <= settings.max_batches && out.stop_reason == "step-limit"; ++step) {
    Index g = settings.sampling.batch_size;
    if (settings.stop.target) g = std::min(g, *settings.stop.target - state.accepted_count());

    std::vector<std::string> prompts;
    prompts.reserve(static_cast<std::size_t>(g));
    for (Index i = 0; i < g; ++i) prompts.push_back(make_inference_prompt(k, sample_permutation(k, rng), settings.prompt));

    SamplingParams params = settings.sampling;
    params.seed = derive_seed(settings.seed, "batch-" + std::to_string(step));
    const std::vector<std::string> completions = backend.generate(handle, prompts, params);
    if (completions.size() != prompts.size()) throw BackendError("backend returned a wrong number of completions");

    std::vector<ParsedRow> parsed;
    parsed.reserve(completions.size());
    for (const auto& c : completions) parsed.push_back(parse_generation(c, k, settings.prompt));
    out.completions.insert(out.completions.end(), completions.begin(), completions.end());

    const BatchDisposition d = filter_batch(parsed, state);
    out.log.push_back({step, g, d.counts, diversity_score(state), d.channel_stats});

    const StopDecision decision = should_stop(state, settings.stop);
    if (decision != StopDecision::Continue) out.stop_reason = to_string(decision);
  }

  out.totals = state.counters();
  out.table.values = state.accepted_table();
  out.table.spans = state.spans();
  out.table.row_ids.resize(static_cast<std::size_t>(out.table.values.rows()));
  for (std::size_t i = 0; i < out.table.row_ids.size(); ++i) out.table.row_ids[i] = static_cast<Index>(i);
  return out;
}

std::string to_jsonl(const std::vector<BatchLog>& log) {
  std::ostringstream s;
  for (const auto& b : log) {
    nlohmann::json j = {{"step", b.step},
                        {"G", b.requested},
                        {"accepted", b.counts.accepted},
                        {"rejected_missing", b.counts.missing},
                        {"rejected_dup", b.counts.duplicate},
                        {"rejected_norm", b.counts.norm},
                        {"diversity", b.diversity}};
    s << j.dump() << '\n';
  }
  return s.str();
}

}  // namespace tsforge
