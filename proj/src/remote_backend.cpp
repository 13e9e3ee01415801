#include "tsforge/backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <thread>

namespace tsforge {

using nlohmann::json;

namespace {

httplib::Client make_client(const RemoteOptions& opts) {
  httplib::Client cli(opts.base_url);
  cli.set_connection_timeout(opts.connect_timeout);
  cli.set_read_timeout(opts.read_timeout);
  cli.set_write_timeout(opts.read_timeout);
  return cli;
}

json parse_reply(const std::string& body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw BackendError(std::string("remote backend: malformed ") + what + " reply: " + e.what());
  }
}

}  // namespace

std::string RemoteBackend::post(const std::string& path, const std::string& body) const {
  httplib::Client cli = make_client(opts_);
  std::string last_error;
  const int attempts = std::max(1, opts_.retries + 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto res = cli.Post(path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      if (attempt < attempts) std::this_thread::sleep_for(opts_.retry_delay * attempt);
      continue;
    }
    if (res->status != 200) {
      std::string message = res->body;
      try {
        const json j = json::parse(res->body);
        if (j.contains("error")) message = j.at("error").get<std::string>();
      } catch (const json::exception&) {
      }
      throw BackendError("remote backend: " + path + " returned HTTP " + std::to_string(res->status) + ": " + message);
    }
    return res->body;
  }
  throw TransportError("remote backend unreachable at " + opts_.base_url + path + " (" + last_error + ") after " +
                           std::to_string(attempts) + " attempts",
                       attempts, opts_.retry_delay);
}

bool RemoteBackend::healthy() const {
  httplib::Client cli = make_client(opts_);
  const auto res = cli.Get("/v1/health");
  if (!res || res->status != 200) return false;
  try {
    return json::parse(res->body).value("status", "") == "ok";
  } catch (const json::exception&) {
    return false;
  }
}

BackendHandle RemoteBackend::fine_tune(const std::vector<std::string>& prompts, const TrainingParams& hyper) {
  hyper.validate();
  if (prompts.empty()) throw DataError("fine_tune: empty prompt corpus");
  const json body = {{"prompts", prompts},
                     {"hyperparams",
                      {{"learning_rate", hyper.learning_rate},
                       {"batch_size", hyper.batch_size},
                       {"max_epochs", hyper.max_epochs},
                       {"patience", hyper.patience},
                       {"val_fraction", hyper.val_fraction},
                       {"eval_every", hyper.eval_every}}}};
  const json reply = parse_reply(post("/v1/finetune", body.dump()), "finetune");
  if (!reply.contains("model_id") || !reply["model_id"].is_string())
    throw BackendError("remote backend: finetune reply lacks model_id");
  return {BackendKind::Remote, reply["model_id"].get<std::string>(), true};
}

std::vector<std::string> RemoteBackend::generate(const BackendHandle& handle, const std::vector<std::string>& prompts,
                                                 const SamplingParams& params) const {
  params.validate();
  if (!handle.fitted || handle.kind != BackendKind::Remote) throw BackendError("generate needs a fitted remote handle");
  if (prompts.empty()) return {};
  const Index k = features_in_prompt(prompts.front());
  json body = {{"model_id", handle.model_id},
               {"prompts", prompts},
               {"temperature", params.temperature},
               {"max_new_tokens", params.max_new_tokens > 0 ? params.max_new_tokens : static_cast<int>(16 * k)}};
  if (params.seed) body["seed"] = *params.seed;
  const json reply = parse_reply(post("/v1/generate", body.dump()), "generate");
  if (!reply.contains("completions") || !reply["completions"].is_array())
    throw BackendError("remote backend: generate reply lacks completions");
  std::vector<std::string> out;
  for (const auto& c : reply["completions"]) {
    if (!c.is_string()) throw BackendError("remote backend: non-string completion");
    out.push_back(c.get<std::string>());
  }
  if (out.size() != prompts.size())
    throw BackendError("remote backend: expected " + std::to_string(prompts.size()) + " completions, got " +
                       std::to_string(out.size()));
  return out;
}

}  // namespace tsforge
