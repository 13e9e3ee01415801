#ifndef TSFORGE_BACKEND_HPP
#define TSFORGE_BACKEND_HPP

#include "tsforge/embedding.hpp"
#include "tsforge/text_codec.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tsforge {

/// Generation backend failures (remote service errors, unfitted handles).
class BackendError : public Error {
public:
  using Error::Error;
};

/// The remote service could not be reached.
class TransportError : public BackendError {
public:
  TransportError(const std::string& what, int attempts, std::chrono::milliseconds retry_delay)
      : BackendError(what), attempts_(attempts), retry_delay_(retry_delay) {}

  int attempts() const { return attempts_; }
  std::chrono::milliseconds retry_delay() const { return retry_delay_; }

private:
  int attempts_;
  std::chrono::milliseconds retry_delay_;
};

enum class BackendKind { Reference, Remote };

std::string to_string(BackendKind k);

struct TrainingParams {
  double learning_rate = 8e-5;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 5;
  double val_fraction = 0.2;
  int eval_every = 5;

  void validate() const;
};

struct SamplingParams {
  double temperature = 1.0;
  Index batch_size = 10;
  /// 0 selects 16 * K.
  int max_new_tokens = 0;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

struct BackendHandle {
  BackendKind kind = BackendKind::Reference;
  std::string model_id;
  bool fitted = false;
};

/// Fine-tune on a prompt corpus, then complete inference prompts.
class GeneratorBackend {
public:
  virtual ~GeneratorBackend() = default;

  virtual BackendKind kind() const = 0;
  virtual BackendHandle fine_tune(const std::vector<std::string>& prompts, const TrainingParams& hyper) = 0;
  /// One completion per prompt, each echoing its prompt followed by K answer-delimited values.
  virtual std::vector<std::string> generate(const BackendHandle& handle, const std::vector<std::string>& prompts,
                                            const SamplingParams& params) const = 0;
};

// Reference backend ---------------------------------------------------------

/// Gaussian copula over empirical marginals of an embedding table.
class CopulaModel {
public:
  CopulaModel() = default;

  Index features() const { return static_cast<Index>(sorted_.size()); }
  const Matrix& correlation() const { return correlation_; }
  const Matrix& training_rows() const { return rows_; }

  /// Correlated normal scores scaled by sqrt(temperature), mapped through the inverse
  /// empirical CDFs (linear interpolation between order statistics).
  RowVector sample(std::mt19937_64& rng, double temperature) const;

  /// Inverse empirical CDF of one feature at probability p.
  double quantile(Index feature, double p) const;

private:
  friend CopulaModel reference_fit(const Matrix& table);

  std::vector<Vector> sorted_;
  Matrix correlation_;
  Matrix chol_;
  Matrix rows_;
};

/// Needs at least 5 rows. A non positive-definite correlation gets 1e-6 added on the diagonal.
CopulaModel reference_fit(const Matrix& table);
inline CopulaModel reference_fit(const EmbeddingTable& table) { return reference_fit(table.values); }

/// Deterministic corruptions used to exercise the filters and stopping rule.
struct FaultModes {
  double missing_rate = 0.0;
  double duplicate_rate = 0.0;
  double outlier_rate = 0.0;
  double outlier_scale = 10.0;
  /// Every row is a sign flip / within-channel shuffle of one training row.
  bool collapse = false;
};

struct ReferenceOptions {
  FaultModes faults;
  /// Channel layout used by the collapse mode; empty means one channel spanning all features.
  std::vector<ChannelSpan> spans;
  PromptTemplate prompt;
};

class ReferenceBackend final : public GeneratorBackend {
public:
  explicit ReferenceBackend(ReferenceOptions opts = {}) : opts_(std::move(opts)) {}

  BackendKind kind() const override { return BackendKind::Reference; }
  /// Parses the fine-tune prompts back into rows and fits the copula.
  BackendHandle fine_tune(const std::vector<std::string>& prompts, const TrainingParams& hyper) override;
  std::vector<std::string> generate(const BackendHandle& handle, const std::vector<std::string>& prompts,
                                    const SamplingParams& params) const override;

  /// Copula fitted on every row of the corpus.
  const CopulaModel& model(const std::string& id) const;
  /// Copula of the rows carrying a condition label; falls back to the pooled model.
  const CopulaModel& model(const std::string& id, const std::string& condition) const;

private:
  struct Fitted {
    CopulaModel pooled;
    std::map<std::string, CopulaModel> by_condition;
  };

  std::shared_ptr<const Fitted> find(const std::string& id) const;

  ReferenceOptions opts_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Fitted>> models_;
};

// Remote backend ------------------------------------------------------------

struct RemoteOptions {
  std::string base_url = "http://127.0.0.1:8000";
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{600000};
  int retries = 2;
  std::chrono::milliseconds retry_delay{200};
};

/// HTTP/JSON client for the fine-tune/generate service.
class RemoteBackend final : public GeneratorBackend {
public:
  explicit RemoteBackend(RemoteOptions opts) : opts_(std::move(opts)) {}

  BackendKind kind() const override { return BackendKind::Remote; }
  BackendHandle fine_tune(const std::vector<std::string>& prompts, const TrainingParams& hyper) override;
  std::vector<std::string> generate(const BackendHandle& handle, const std::vector<std::string>& prompts,
                                    const SamplingParams& params) const override;
  bool healthy() const;

private:
  std::string post(const std::string& path, const std::string& body) const;

  RemoteOptions opts_;
};

/// Rows recovered from a fine-tune corpus; prompts that do not parse completely are skipped.
Matrix rows_from_corpus(const std::vector<std::string>& prompts, Index k, const PromptTemplate& tmpl = {});

/// Number of features announced by the Input section of the first prompt.
Index features_in_prompt(const std::string& prompt);

}  // namespace tsforge

#endif  // TSFORGE_BACKEND_HPP
