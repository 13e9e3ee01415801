#include "tsforge/backend.hpp"

#include <regex>

namespace tsforge {

std::string to_string(BackendKind k) { return k == BackendKind::Reference ? "reference" : "remote"; }

void TrainingParams::validate() const {
  if (!(learning_rate > 0)) throw DataError("learning_rate must be positive");
  if (batch_size < 1) throw DataError("batch_size must be positive");
  if (max_epochs < 1) throw DataError("max_epochs must be positive");
  if (patience < 1) throw DataError("patience must be positive");
  if (!(val_fraction > 0 && val_fraction < 1)) throw DataError("val_fraction must lie in (0, 1)");
  if (eval_every < 1) throw DataError("eval_every must be positive");
}

void SamplingParams::validate() const {
  if (!(temperature > 0)) throw DataError("temperature must be positive");
  if (batch_size < 1) throw DataError("batch size G must be >= 1");
  if (max_new_tokens < 0) throw DataError("max_new_tokens must be non-negative");
}

Index features_in_prompt(const std::string& prompt) {
  static const std::regex slot(R"(value_(\d+)\s+is)");
  const auto sep = prompt.find("[sep]", prompt.find("Input:"));
  const std::string head = prompt.substr(0, sep);
  return std::distance(std::sregex_iterator(head.begin(), head.end(), slot), std::sregex_iterator());
}

Matrix rows_from_corpus(const std::vector<std::string>& prompts, Index k, const PromptTemplate& tmpl) {
  std::vector<RowVector> rows;
  for (const auto& p : prompts) {
    const ParsedRow parsed = parse_generation(p, k, tmpl);
    if (parsed.complete()) rows.push_back(parsed.to_row());
  }
  Matrix out(static_cast<Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i];
  return out;
}

}  // namespace tsforge
