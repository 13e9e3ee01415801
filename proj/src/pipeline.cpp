#include "tsforge/pipeline.hpp"

#include "tsforge/persistence.hpp"
#include "tsforge/segmentation.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tsforge {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "tsforge 0.1.0";

template <typename F>
StageRecord timed(const std::string& name, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  StageRecord rec = run_stage(name, std::forward<F>(body));
  rec.name = name;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing artifact '" + path.string() + "'");
  return json::parse(in);
}

std::vector<std::filesystem::path> files_under(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::exists(dir)) return out;
  if (std::filesystem::is_regular_file(dir)) return {dir};
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

PromptTemplate prompt_template(const RunConfig& cfg) {
  PromptTemplate t;
  t.precision = cfg.precision;
  return t;
}

FastIcaOptions ica_options(const RunConfig& cfg) {
  FastIcaOptions o;
  o.max_iter = cfg.ica_max_iter;
  o.tol = cfg.ica_tol;
  o.seed = derive_seed(cfg.seed, "embed");
  return o;
}

EmbeddingTable channel_table(const EmbeddingTable& table, Index c) {
  const auto& span = table.spans.at(static_cast<std::size_t>(c));
  EmbeddingTable out;
  out.values = table.values.middleCols(span.start, span.width);
  out.spans = {{span.name, 0, span.width}};
  out.row_ids = table.row_ids;
  return out;
}

json handle_to_json(const BackendHandle& h) {
  return {{"kind", to_string(h.kind)}, {"model_id", h.model_id}, {"fitted", h.fitted}};
}

}  // namespace

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Multisample: return "multisample";
    case RunMode::Univariate: return "univariate";
    case RunMode::Multivariate: return "multivariate";
  }
  return "?";
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "multisample") return RunMode::Multisample;
  if (s == "univariate") return RunMode::Univariate;
  if (s == "multivariate") return RunMode::Multivariate;
  throw ConfigError("unknown mode '" + s + "' (expected multisample, univariate or multivariate)");
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (input.empty()) fail("input path is required");
  if (mode != RunMode::Multisample) {
    if (length < 2) fail("length must be >= 2");
    if (instances < 2) fail("instances must be >= 2");
  }
  if (k && *k < 1) fail("k must be >= 1");
  if (!k && !variance_target) fail("either k or variance_target is required");
  if (variance_target && !(*variance_target > 0 && *variance_target <= 1)) fail("variance_target must lie in (0, 1]");
  if (k_max < 1) fail("k_max must be >= 1");
  if (ica_max_iter < 1) fail("ica_max_iter must be >= 1");
  if (!(ica_tol > 0)) fail("ica_tol must be positive");
  if (target < 0) fail("target must be >= 0");
  if (!(lambda_stop >= 0 && lambda_stop <= 1)) fail("lambda_stop must lie in [0, 1]");
  if (max_batches < 1) fail("max_batches must be >= 1");
  if (precision < 1 || precision > 12) fail("precision must lie in [1, 12]");
  if (metrics.empty()) fail("at least one metric is required");
  if (backend == BackendKind::Remote && remote.base_url.empty()) fail("remote backend needs a URL");
  for (const double r : {faults.missing_rate, faults.duplicate_rate, faults.outlier_rate})
    if (!(r >= 0 && r <= 1)) fail("fault rates must lie in [0, 1]");
  try {
    training.validate();
    sampling.validate();
  } catch (const DataError& e) {
    fail(e.what());
  }
}

StopParams RunConfig::stop_params() const {
  StopParams p;
  p.lambda_stop = lambda_stop;
  if (target > 0) p.target = target;
  p.max_accepted = max_accepted.value_or(target > 0 ? 10 * target : 1000);
  return p;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("input")) c.input = j.at("input").get<std::string>();
    if (j.contains("columns")) c.columns = j.at("columns").get<std::vector<std::string>>();
    if (j.contains("mode")) c.mode = parse_run_mode(j.at("mode").get<std::string>());
    c.length = j.value("length", c.length);
    c.instances = j.value("instances", c.instances);
    if (j.contains("period") && !j.at("period").is_null()) {
      if (j.at("period").is_string()) {
        if (j.at("period").get<std::string>() != "auto") throw ConfigError("period must be an integer or \"auto\"");
      } else {
        c.period = j.at("period").get<Index>();
      }
    }
    if (j.contains("method")) c.method = parse_basis_method(j.at("method").get<std::string>());
    if (j.contains("k")) c.k = j.at("k").is_null() ? std::nullopt : std::optional<Index>(j.at("k").get<Index>());
    if (j.contains("variance_target") && !j.at("variance_target").is_null())
      c.variance_target = j.at("variance_target").get<double>();
    c.k_max = j.value("k_max", c.k_max);
    c.shared_basis = j.value("shared_basis", c.shared_basis);
    c.scale = j.value("scale", c.scale);
    c.ica_max_iter = j.value("ica_max_iter", c.ica_max_iter);
    c.ica_tol = j.value("ica_tol", c.ica_tol);
    if (j.contains("backend")) {
      const auto b = j.at("backend").get<std::string>();
      if (b == "reference") c.backend = BackendKind::Reference;
      else if (b == "remote") c.backend = BackendKind::Remote;
      else throw ConfigError("unknown backend '" + b + "'");
    }
    if (j.contains("remote_url")) c.remote.base_url = j.at("remote_url").get<std::string>();
    if (j.contains("faults")) {
      const json& f = j.at("faults");
      c.faults.missing_rate = f.value("missing_rate", 0.0);
      c.faults.duplicate_rate = f.value("duplicate_rate", 0.0);
      c.faults.outlier_rate = f.value("outlier_rate", 0.0);
      c.faults.outlier_scale = f.value("outlier_scale", 10.0);
      c.faults.collapse = f.value("collapse", false);
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.training.max_epochs = t.value("max_epochs", c.training.max_epochs);
      c.training.patience = t.value("patience", c.training.patience);
      c.training.val_fraction = t.value("val_fraction", c.training.val_fraction);
      c.training.eval_every = t.value("eval_every", c.training.eval_every);
    }
    if (j.contains("sampling")) {
      const json& s = j.at("sampling");
      c.sampling.temperature = s.value("temperature", c.sampling.temperature);
      c.sampling.batch_size = s.value("batch_size", c.sampling.batch_size);
      c.sampling.max_new_tokens = s.value("max_new_tokens", c.sampling.max_new_tokens);
    }
    c.target = j.value("target", c.target);
    c.lambda_stop = j.value("lambda_stop", c.lambda_stop);
    if (j.contains("max_accepted") && !j.at("max_accepted").is_null()) c.max_accepted = j.at("max_accepted").get<Index>();
    c.max_batches = j.value("max_batches", c.max_batches);
    c.precision = j.value("precision", c.precision);
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : j.at("metrics")) c.metrics.push_back(parse_metric(m.get<std::string>()));
    }
    if (j.contains("metric_options")) {
      const json& m = j.at("metric_options");
      if (m.contains("bins") && !m.at("bins").is_null()) c.metric_options.bins = m.at("bins").get<Index>();
      if (m.contains("max_lag") && !m.at("max_lag").is_null()) c.metric_options.max_lag = m.at("max_lag").get<Index>();
      if (m.contains("dtw_window") && !m.at("dtw_window").is_null())
        c.metric_options.dtw_window = m.at("dtw_window").get<Index>();
      if (m.value("pairing", std::string("nearest")) == "index") c.metric_options.pairing = Pairing::Index;
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  const auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json metrics = json::array();
  for (const Metric m : c.metrics) metrics.push_back(to_string(m));
  return {{"input", c.input.string()},
          {"columns", c.columns},
          {"mode", to_string(c.mode)},
          {"length", c.length},
          {"instances", c.instances},
          {"period", c.period ? json(*c.period) : json("auto")},
          {"method", to_string(c.method)},
          {"k", opt(c.k)},
          {"variance_target", opt(c.variance_target)},
          {"k_max", c.k_max},
          {"shared_basis", c.shared_basis},
          {"scale", c.scale},
          {"ica_max_iter", c.ica_max_iter},
          {"ica_tol", c.ica_tol},
          {"backend", to_string(c.backend)},
          {"remote_url", c.remote.base_url},
          {"faults",
           {{"missing_rate", c.faults.missing_rate},
            {"duplicate_rate", c.faults.duplicate_rate},
            {"outlier_rate", c.faults.outlier_rate},
            {"outlier_scale", c.faults.outlier_scale},
            {"collapse", c.faults.collapse}}},
          {"training",
           {{"learning_rate", c.training.learning_rate},
            {"batch_size", c.training.batch_size},
            {"max_epochs", c.training.max_epochs},
            {"patience", c.training.patience},
            {"val_fraction", c.training.val_fraction},
            {"eval_every", c.training.eval_every}}},
          {"sampling",
           {{"temperature", c.sampling.temperature},
            {"batch_size", c.sampling.batch_size},
            {"max_new_tokens", c.sampling.max_new_tokens}}},
          {"target", c.target},
          {"lambda_stop", c.lambda_stop},
          {"max_accepted", c.stop_params().max_accepted},
          {"max_batches", c.max_batches},
          {"precision", c.precision},
          {"metrics", metrics},
          {"metric_options",
           {{"bins", opt(c.metric_options.bins)},
            {"max_lag", opt(c.metric_options.max_lag)},
            {"dtw_window", opt(c.metric_options.dtw_window)},
            {"pairing", c.metric_options.pairing == Pairing::Index ? "index" : "nearest"}}},
          {"seed", c.seed},
          {"output", c.output.string()}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

json RunManifest::to_json() const {
  json stage_list = json::array();
  for (const auto& s : stages) {
    std::vector<std::string> files;
    for (const auto& a : s.artifacts) files.push_back(a.generic_string());
    stage_list.push_back({{"name", s.name}, {"seconds", s.seconds}, {"artifacts", files}});
  }
  json files = json::array();
  for (const auto& [path, hash] : hashes) files.push_back({{"path", path}, {"sha256", hash}});
  json gen = json::array();
  for (const auto& g : generation)
    gen.push_back({{"stop_reason", g.stop_reason},
                   {"batches", g.batches},
                   {"accepted", g.totals.accepted},
                   {"rejected_missing", g.totals.missing},
                   {"rejected_dup", g.totals.duplicate},
                   {"rejected_norm", g.totals.norm}});
  return {{"config", config},
          {"stages", stage_list},
          {"artifacts", files},
          {"generation", gen},
          {"warnings", warnings},
          {"versions",
           {{"tsforge", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)}}}};
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::unique_ptr<GeneratorBackend> make_backend(const RunConfig& cfg, const std::vector<ChannelSpan>& spans) {
  if (cfg.backend == BackendKind::Remote) return std::make_unique<RemoteBackend>(cfg.remote);
  ReferenceOptions opts;
  opts.faults = cfg.faults;
  opts.spans = spans;
  opts.prompt = prompt_template(cfg);
  return std::make_unique<ReferenceBackend>(opts);
}

StageRecord stage_segment(const RunConfig& cfg) {
  return timed("segment", [&] {
    const RunLayout out{cfg.output};
    StageRecord rec;
    std::filesystem::remove_all(out.windows());
    if (cfg.mode == RunMode::Multisample) {
      InstanceSet x = read_windows(cfg.input);
      if (!cfg.columns.empty()) {
        std::vector<Matrix> kept;
        std::vector<std::string> names;
        for (const auto& col : cfg.columns) {
          const auto& all = x.channel_names();
          const auto it = std::find(all.begin(), all.end(), col);
          if (it == all.end()) throw DataError("channel '" + col + "' not found in '" + cfg.input.string() + "'");
          kept.push_back(x.channel(it - all.begin()));
          names.push_back(col);
        }
        x = InstanceSet(std::move(kept), std::move(names), x.origin_offsets());
      }
      write_windows(out.windows(), x);
      rec.artifacts = {out.windows()};
      return rec;
    }
    RawSeries series = load_dataset(cfg.input, ColumnSchema{cfg.columns});
    if (cfg.mode == RunMode::Univariate && series.channel_count() > 1) series.channels.resize(1);
    SegmentOptions opts;
    opts.period = cfg.period;
    const Segmentation seg = segment(series, cfg.length, cfg.instances, opts);
    write_windows(out.windows(), seg.windows);
    write_plan(out.plan(), seg.plan);
    rec.artifacts = {out.windows(), out.plan()};
    return rec;
  });
}

StageRecord stage_embed(const RunConfig& cfg, std::vector<std::string>* warnings) {
  return timed("embed", [&] {
    const RunLayout out{cfg.output};
    const InstanceSet raw = read_windows(out.windows());
    std::filesystem::create_directories(out.basis().parent_path());
    InstanceSet x = raw;
    if (cfg.scale) {
      const ScalerState s = fit_scaler(raw);
      write_scaler(out.scaler(), s);
      x = apply_scaler(raw, s);
    } else {
      std::filesystem::remove(out.scaler());
    }

    const FastIcaOptions ica = ica_options(cfg);
    std::vector<std::string> notes;
    BasisSystem basis;
    if (cfg.shared_basis) {
      Index k = cfg.k.value_or(0);
      if (!cfg.k) {
        Matrix pooled(x.instances() * x.channels(), x.length());
        for (Index c = 0; c < x.channels(); ++c) pooled.middleRows(c * x.instances(), x.instances()) = x.channel(c);
        const KSelection sel = select_k(InstanceSet({pooled}, {"shared"}), cfg.method, *cfg.variance_target, cfg.k_max, ica);
        k = sel.k.front();
        notes.insert(notes.end(), sel.warnings.begin(), sel.warnings.end());
      }
      basis = fit_shared_basis(x, cfg.method, k, ica);
    } else {
      std::vector<Index> k;
      if (cfg.k) {
        k = {*cfg.k};
      } else {
        const KSelection sel = select_k(x, cfg.method, *cfg.variance_target, cfg.k_max, ica);
        k = sel.k;
        notes.insert(notes.end(), sel.warnings.begin(), sel.warnings.end());
      }
      basis = fit_basis(x, cfg.method, k, ica);
    }
    for (const auto& ch : basis.channels)
      for (const auto& w : ch.warnings) notes.push_back(ch.name + ": " + w);

    const EmbeddingTable table = embed(x, basis);
    write_basis(out.basis(), basis);
    write_table(out.table(), table);

    const auto retained = variance_retained(x, basis);
    json vr = json::object();
    for (std::size_t c = 0; c < retained.size(); ++c) vr[basis.channels[c].name] = retained[c];
    write_text(out.root / "basis" / "variance.json", vr.dump(2) + "\n");

    if (warnings) warnings->insert(warnings->end(), notes.begin(), notes.end());
    StageRecord rec;
    rec.artifacts = {out.basis(), out.table(), sidecar_path(out.table()), out.root / "basis" / "variance.json"};
    if (cfg.scale) rec.artifacts.push_back(out.scaler());
    return rec;
  });
}

StageRecord stage_encode(const RunConfig& cfg) {
  return timed("encode", [&] {
    const RunLayout out{cfg.output};
    const EmbeddingTable table = read_table(out.table());
    const BasisSystem basis = read_basis(out.basis());
    std::mt19937_64 rng(derive_seed(cfg.seed, "encode"));
    std::vector<std::string> prompts;
    PromptTemplate tmpl = prompt_template(cfg);
    if (basis.shared) {
      for (Index i = 0; i < table.rows(); ++i)
        for (const auto& span : table.spans) {
          tmpl.condition = span.name;
          const RowVector row = table.values.row(i).segment(span.start, span.width);
          prompts.push_back(encode_finetune(row, sample_permutation(span.width, rng), tmpl));
        }
    } else {
      for (Index i = 0; i < table.rows(); ++i)
        prompts.push_back(encode_finetune(RowVector(table.values.row(i)), sample_permutation(table.cols(), rng), tmpl));
    }
    std::filesystem::create_directories(out.finetune_corpus().parent_path());
    write_corpus(out.finetune_corpus(), prompts);
    StageRecord rec;
    rec.artifacts = {out.finetune_corpus()};
    return rec;
  });
}

StageRecord stage_finetune(const RunConfig& cfg) {
  return timed("finetune", [&] {
    const RunLayout out{cfg.output};
    const auto prompts = read_corpus(out.finetune_corpus());
    auto backend = make_backend(cfg);
    const BackendHandle handle = backend->fine_tune(prompts, cfg.training);
    write_text(out.handle(), handle_to_json(handle).dump(2) + "\n");
    StageRecord rec;
    rec.artifacts = {out.handle()};
    return rec;
  });
}

StageRecord stage_generate(const RunConfig& cfg, std::vector<GenerationSummary>* summary) {
  return timed("generate", [&] {
    const RunLayout out{cfg.output};
    const EmbeddingTable table = read_table(out.table());
    const BasisSystem basis = read_basis(out.basis());
    const json h = read_json(out.handle());
    BackendHandle handle{h.at("kind").get<std::string>() == "remote" ? BackendKind::Remote : BackendKind::Reference,
                         h.at("model_id").get<std::string>(), h.value("fitted", false)};
    if (handle.kind != cfg.backend)
      throw ConfigError("handle in '" + out.handle().string() + "' belongs to the " + to_string(handle.kind) + " backend");

    std::vector<ChannelSpan> collapse_spans = basis.shared ? std::vector<ChannelSpan>{} : table.spans;
    auto backend = make_backend(cfg, collapse_spans);
    if (handle.kind == BackendKind::Reference) {
      // the reference model lives in memory; refit it from the persisted corpus
      const BackendHandle refit = backend->fine_tune(read_corpus(out.finetune_corpus()), cfg.training);
      if (refit.model_id != handle.model_id)
        throw DataError("fine-tune corpus changed since the finetune stage (model id mismatch)");
    }

    GenerationSettings settings;
    settings.sampling = cfg.sampling;
    settings.stop = cfg.stop_params();
    settings.max_batches = cfg.max_batches;
    settings.prompt = prompt_template(cfg);

    std::ostringstream log;
    std::vector<std::string> completions;
    EmbeddingTable generated;
    std::vector<GenerationSummary> summaries;
    if (basis.shared) {
      std::vector<Matrix> blocks;
      for (Index c = 0; c < static_cast<Index>(table.spans.size()); ++c) {
        const auto& span = table.spans[static_cast<std::size_t>(c)];
        settings.prompt.condition = span.name;
        settings.seed = derive_seed(cfg.seed, "generate-" + span.name);
        const GenerationResult r = generate_filtered(*backend, handle, channel_table(table, c), settings);
        std::istringstream lines(to_jsonl(r.log));
        for (std::string line; std::getline(lines, line);) {
          json j = json::parse(line);
          j["channel"] = span.name;
          log << j.dump() << '\n';
        }
        completions.insert(completions.end(), r.completions.begin(), r.completions.end());
        blocks.push_back(r.table.values);
        summaries.push_back({r.stop_reason, static_cast<Index>(r.log.size()), r.totals});
      }
      Index rows = blocks.front().rows();
      for (const auto& b : blocks) rows = std::min(rows, b.rows());
      generated.values.resize(rows, table.cols());
      for (std::size_t c = 0; c < blocks.size(); ++c)
        generated.values.middleCols(table.spans[c].start, table.spans[c].width) = blocks[c].topRows(rows);
      generated.spans = table.spans;
    } else {
      settings.seed = derive_seed(cfg.seed, "generate");
      const GenerationResult r = generate_filtered(*backend, handle, table, settings);
      log << to_jsonl(r.log);
      completions = r.completions;
      generated = r.table;
      summaries.push_back({r.stop_reason, static_cast<Index>(r.log.size()), r.totals});
    }
    generated.row_ids.resize(static_cast<std::size_t>(generated.rows()));
    for (std::size_t i = 0; i < generated.row_ids.size(); ++i) generated.row_ids[i] = static_cast<Index>(i);

    write_table(out.generated_table(), generated);
    write_text(out.filter_log(), log.str());
    write_corpus(out.completions(), completions);
    if (summary) *summary = summaries;
    StageRecord rec;
    rec.artifacts = {out.generated_table(), sidecar_path(out.generated_table()), out.filter_log(), out.completions()};
    return rec;
  });
}

StageRecord stage_decode(const RunConfig& cfg) {
  return timed("decode", [&] {
    const RunLayout out{cfg.output};
    const EmbeddingTable generated = read_table(out.generated_table());
    const BasisSystem basis = read_basis(out.basis());
    InstanceSet series = reconstruct(generated, basis);
    if (std::filesystem::exists(out.scaler())) series = invert_scaler(series, read_scaler(out.scaler()));
    std::filesystem::remove_all(out.decoded());
    write_windows(out.decoded(), series);
    StageRecord rec;
    rec.artifacts = {out.decoded()};
    return rec;
  });
}

StageRecord stage_evaluate(const RunConfig& cfg) {
  return timed("evaluate", [&] {
    const RunLayout out{cfg.output};
    const InstanceSet orig = read_windows(out.windows());
    const InstanceSet gen = read_windows(out.decoded());
    const MetricReport report = evaluate(orig, gen, cfg.metrics, cfg.metric_options);
    std::filesystem::create_directories(out.report().parent_path());
    write_report(out.report(), report);
    StageRecord rec;
    rec.artifacts = {out.report()};
    return rec;
  });
}

RunManifest run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const RunLayout out{cfg.output};
  std::filesystem::create_directories(out.root);
  RunManifest m;
  m.config = to_json(cfg);
  m.stages.push_back(stage_segment(cfg));
  m.stages.push_back(stage_embed(cfg, &m.warnings));
  m.stages.push_back(stage_encode(cfg));
  m.stages.push_back(stage_finetune(cfg));
  m.stages.push_back(stage_generate(cfg, &m.generation));
  m.stages.push_back(stage_decode(cfg));
  m.stages.push_back(stage_evaluate(cfg));

  for (const auto& stage : m.stages)
    for (const auto& artifact : stage.artifacts)
      for (const auto& file : files_under(artifact))
        m.hashes.emplace_back(std::filesystem::relative(file, out.root).generic_string(), sha256_file(file));
  std::sort(m.hashes.begin(), m.hashes.end());
  m.hashes.erase(std::unique(m.hashes.begin(), m.hashes.end()), m.hashes.end());
  write_text(out.manifest(), m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace tsforge
