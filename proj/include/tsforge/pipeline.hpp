#ifndef TSFORGE_PIPELINE_HPP
#define TSFORGE_PIPELINE_HPP

#include "tsforge/backend.hpp"
#include "tsforge/embedding.hpp"
#include "tsforge/generation.hpp"
#include "tsforge/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsforge {

/// Invalid run configuration (exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name and the process exit code.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& what, int exit_code)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)), exit_code_(exit_code) {}

  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

private:
  std::string stage_;
  int exit_code_;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kStage = 3;
inline constexpr int kRemote = 4;
}  // namespace exit_code

enum class RunMode { Multisample, Univariate, Multivariate };

std::string to_string(RunMode m);
RunMode parse_run_mode(const std::string& s);

struct RunConfig {
  /// CSV for univariate/multivariate runs, a windows directory for multisample runs.
  std::filesystem::path input;
  std::vector<std::string> columns;
  RunMode mode = RunMode::Univariate;

  Index length = 250;
  Index instances = 30;
  std::optional<Index> period;  // fixed period; auto-detected when empty

  BasisMethod method = BasisMethod::FICA;
  std::optional<Index> k = 3;
  std::optional<double> variance_target;  // used when k is empty
  Index k_max = 25;
  /// Pool all channels into one basis and condition prompts on the channel name.
  bool shared_basis = false;
  bool scale = true;
  int ica_max_iter = 500;
  double ica_tol = 1e-6;

  BackendKind backend = BackendKind::Reference;
  RemoteOptions remote;
  FaultModes faults;
  TrainingParams training;
  SamplingParams sampling;

  Index target = 100;  // 0 disables fixed-count mode
  double lambda_stop = 0.1;
  std::optional<Index> max_accepted;  // default 10 x target
  Index max_batches = 1000;
  int precision = 4;

  std::vector<Metric> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
  MetricOptions metric_options;

  std::uint64_t seed = 0;
  std::filesystem::path output = "out";

  /// Throws ConfigError.
  void validate() const;
  StopParams stop_params() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Artifact locations under the output directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path windows() const { return root / "windows"; }
  std::filesystem::path plan() const { return root / "windows" / "plan.json"; }
  std::filesystem::path basis() const { return root / "basis" / "basis.json"; }
  std::filesystem::path scaler() const { return root / "basis" / "scaler.json"; }
  std::filesystem::path table() const { return root / "table" / "embedding.csv"; }
  std::filesystem::path finetune_corpus() const { return root / "prompts" / "finetune.txt"; }
  std::filesystem::path handle() const { return root / "prompts" / "handle.json"; }
  std::filesystem::path generated_table() const { return root / "generated" / "table.csv"; }
  std::filesystem::path filter_log() const { return root / "generated" / "filter_log.jsonl"; }
  std::filesystem::path completions() const { return root / "generated" / "completions.txt"; }
  std::filesystem::path decoded() const { return root / "decoded"; }
  std::filesystem::path report() const { return root / "report" / "report.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  std::vector<std::filesystem::path> artifacts;
};

struct GenerationSummary {
  std::string stop_reason;
  Index batches = 0;
  FilterCounters totals;
};

struct RunManifest {
  nlohmann::json config;
  std::vector<StageRecord> stages;
  /// Relative path -> SHA-256 of every produced file.
  std::vector<std::pair<std::string, std::string>> hashes;
  std::vector<GenerationSummary> generation;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

std::unique_ptr<GeneratorBackend> make_backend(const RunConfig& cfg, const std::vector<ChannelSpan>& spans = {});

// Stages; each reads the artifacts of earlier stages from cfg.output.
StageRecord stage_segment(const RunConfig& cfg);
StageRecord stage_embed(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr);
StageRecord stage_encode(const RunConfig& cfg);
StageRecord stage_finetune(const RunConfig& cfg);
StageRecord stage_generate(const RunConfig& cfg, std::vector<GenerationSummary>* summary = nullptr);
StageRecord stage_decode(const RunConfig& cfg);
StageRecord stage_evaluate(const RunConfig& cfg);

/// segment -> embed -> encode -> finetune -> generate -> decode -> evaluate, then manifest.json.
RunManifest run_pipeline(const RunConfig& cfg);

std::string sha256_file(const std::filesystem::path& path);

/// Runs a stage and converts failures into StageError with the matching exit code.
template <typename F>
auto run_stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const BackendError& e) {
    throw StageError(name, e.what(), exit_code::kRemote);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), exit_code::kStage);
  }
}

}  // namespace tsforge

#endif  // TSFORGE_PIPELINE_HPP
