#include "tsforge/text_codec.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>

namespace tsforge {

namespace {

constexpr std::string_view kInput = "Input:";
constexpr std::string_view kTarget = "Target:";
constexpr std::string_view kConditionPrefix = "Condition: data is ";

void check_perm(const Permutation& perm, std::size_t k) {
  if (perm.size() != k) throw DataError("permutation length does not match the row length");
  std::vector<bool> seen(k, false);
  for (const Index p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= k || seen[static_cast<std::size_t>(p)])
      throw DataError("not a permutation of 0..K-1");
    seen[static_cast<std::size_t>(p)] = true;
  }
}

std::string input_section(const Permutation& perm, const PromptTemplate& tmpl) {
  std::string out;
  if (tmpl.condition) out += std::string(kConditionPrefix) + *tmpl.condition + " " + tmpl.sep + " ";
  out += kInput;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out += i ? ", " : " ";
    out += "value_" + std::to_string(perm[i] + 1) + " is " + tmpl.blank;
  }
  out += " " + tmpl.sep + " ";
  out += kTarget;
  return out;
}

}  // namespace

void PromptTemplate::validate() const {
  if (precision < 1) throw DataError("prompt precision must be >= 1");
  if (blank.empty() || sep.empty() || answer.empty()) throw DataError("prompt control tokens must be non-empty");
  if (blank == sep || blank == answer || sep == answer) throw DataError("prompt control tokens must be distinct");
}

bool ParsedRow::complete() const {
  return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

std::size_t ParsedRow::missing_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const auto& v) { return !v; }));
}

RowVector ParsedRow::to_row() const {
  RowVector r(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    r(static_cast<Index>(i)) = values[i].value_or(std::numeric_limits<double>::quiet_NaN());
  return r;
}

Permutation sample_permutation(Index k, std::mt19937_64& rng) {
  if (k < 1) throw DataError("sample_permutation: K must be >= 1");
  Permutation perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::string format_value(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string encode_finetune(std::span<const double> row, const Permutation& perm, const PromptTemplate& tmpl) {
  tmpl.validate();
  check_perm(perm, row.size());
  std::string out = input_section(perm, tmpl);
  for (const Index p : perm) {
    const double v = row[static_cast<std::size_t>(p)];
    if (!std::isfinite(v)) throw DataError("encode_finetune: non-finite value");
    out += " " + format_value(v, tmpl.precision) + " " + tmpl.answer;
  }
  return out;
}

std::string encode_finetune(const RowVector& row, const Permutation& perm, const PromptTemplate& tmpl) {
  return encode_finetune(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), perm, tmpl);
}

std::string make_inference_prompt(Index k, const Permutation& perm, const PromptTemplate& tmpl) {
  tmpl.validate();
  if (k < 1) throw DataError("make_inference_prompt: K must be >= 1");
  check_perm(perm, static_cast<std::size_t>(k));
  return input_section(perm, tmpl);
}

ParsedRow parse_generation(const std::string& text, Index k, const PromptTemplate& tmpl,
                           const std::optional<Permutation>& fallback) {
  ParsedRow row;
  row.source_text = text;
  row.values.assign(static_cast<std::size_t>(std::max<Index>(k, 0)), std::nullopt);
  const std::string_view view(text);

  std::size_t input_at = view.find(kInput);
  if (const auto cond_at = view.find(kConditionPrefix); cond_at != std::string_view::npos &&
                                                        (input_at == std::string_view::npos || cond_at < input_at)) {
    const std::size_t label_at = cond_at + kConditionPrefix.size();
    const std::size_t label_end = view.find(tmpl.sep, label_at);
    if (label_end != std::string_view::npos) row.condition = std::string(csv::trim(view.substr(label_at, label_end - label_at)));
  }

  std::size_t target_from = 0;
  // Slot s of the answer list carries feature ids[s]; -1 marks an unusable id.
  std::vector<Index> ids;
  if (input_at != std::string_view::npos) {
    const std::size_t sep_at = view.find(tmpl.sep, input_at);
    const std::size_t input_end = sep_at == std::string_view::npos ? view.size() : sep_at;
    const std::string section(view.substr(input_at, input_end - input_at));
    static const std::regex slot(R"(value_(\d+)\s+is)");
    std::vector<bool> seen(row.values.size(), false);
    Permutation read;
    for (auto it = std::sregex_iterator(section.begin(), section.end(), slot); it != std::sregex_iterator(); ++it) {
      Index id = -1;
      const std::string digits = (*it)[1].str();
      if (digits.size() < 10) id = std::stoll(digits) - 1;
      if (id < 0 || id >= k || seen[static_cast<std::size_t>(id)]) {
        ids.push_back(-1);
      } else {
        seen[static_cast<std::size_t>(id)] = true;
        ids.push_back(id);
      }
      read.push_back(id);
    }
    row.permutation = std::move(read);
    target_from = input_end;
  } else if (fallback) {
    ids = *fallback;
  } else {
    ids.resize(row.values.size());
    std::iota(ids.begin(), ids.end(), Index{0});
  }

  const std::size_t target_at = view.find(kTarget, target_from);
  if (target_at == std::string_view::npos) return row;
  std::string_view rest = view.substr(target_at + kTarget.size());

  std::size_t slot_index = 0;
  while (slot_index < ids.size()) {
    const std::size_t end = rest.find(tmpl.answer);
    if (end == std::string_view::npos) break;  // unterminated trailing fragment
    const auto value = csv::parse_number(rest.substr(0, end));
    const Index feature = ids[slot_index];
    if (value && std::isfinite(*value) && feature >= 0) row.values[static_cast<std::size_t>(feature)] = *value;
    rest.remove_prefix(end + tmpl.answer.size());
    ++slot_index;
  }
  return row;
}

void write_corpus(const std::filesystem::path& path, const std::vector<std::string>& prompts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& p : prompts) {
    if (p.find('\n') != std::string::npos) throw DataError("prompt contains a newline");
    out << p << '\n';
  }
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace tsforge
