// tsforge: staged synthetic time-series generation from a command line.

#include "tsforge/persistence.hpp"
#include "tsforge/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace tsforge;
using nlohmann::json;

namespace {

// Flag values; unset flags leave the config file (or defaults) untouched.
struct Overrides {
  std::string config;
  std::optional<std::string> out, input, mode, period, method, backend, url, metrics, pairing;
  std::vector<std::string> columns;
  std::optional<Index> length, instances, k, k_max, count, batch_size, max_accepted, max_batches, bins, max_lag,
      dtw_window;
  std::optional<double> variance_target, temperature, lambda_stop, missing_rate, duplicate_rate, outlier_rate;
  std::optional<std::uint64_t> seed;
  bool shared = false, no_scale = false, collapse = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run configuration");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "root random seed");
}

void add_segment_opts(CLI::App* app, Overrides& o) {
  app->add_option("--input", o.input, "CSV dataset, or a windows directory in multisample mode");
  app->add_option("--columns", o.columns, "channels to keep")->delimiter(',');
  app->add_option("--mode", o.mode, "multisample | univariate | multivariate");
  app->add_option("--length", o.length, "window length L");
  app->add_option("--instances", o.instances, "number of windows I");
  app->add_option("--period", o.period, "auto or a fixed period");
}

void add_embed_opts(CLI::App* app, Overrides& o) {
  app->add_option("--method", o.method, "fpc | fica");
  app->add_option("--k", o.k, "components per channel");
  app->add_option("--variance-target", o.variance_target, "choose k by retained variance instead");
  app->add_option("--k-max", o.k_max, "upper bound for the variance-driven choice");
  app->add_flag("--shared", o.shared, "one basis over all channels, prompts conditioned on the channel");
  app->add_flag("--no-scale", o.no_scale, "skip per-channel standardization");
}

void add_backend_opts(CLI::App* app, Overrides& o) {
  app->add_option("--backend", o.backend, "reference | remote");
  app->add_option("--url", o.url, "remote service base URL");
}

void add_generate_opts(CLI::App* app, Overrides& o) {
  app->add_option("--count", o.count, "target number of accepted rows (0 = stop on collapse or cap)");
  app->add_option("--batch-size", o.batch_size, "prompts per batch");
  app->add_option("--temperature", o.temperature, "sampling temperature");
  app->add_option("--lambda-stop", o.lambda_stop, "diversity threshold");
  app->add_option("--max-accepted", o.max_accepted, "hard cap on accepted rows");
  app->add_option("--max-batches", o.max_batches, "batch guard");
  app->add_option("--missing-rate", o.missing_rate, "reference backend: drop one answer");
  app->add_option("--duplicate-rate", o.duplicate_rate, "reference backend: repeat a training row");
  app->add_option("--outlier-rate", o.outlier_rate, "reference backend: scale a row");
  app->add_flag("--collapse", o.collapse, "reference backend: emit variants of one row");
}

void add_metric_opts(CLI::App* app, Overrides& o) {
  app->add_option("--metrics", o.metrics, "comma separated subset of mdd,acd,sd,kd,ed,dtw");
  app->add_option("--bins", o.bins, "MDD histogram bins");
  app->add_option("--max-lag", o.max_lag, "ACD lags");
  app->add_option("--dtw-window", o.dtw_window, "Sakoe-Chiba band");
  app->add_option("--pairing", o.pairing, "nearest | index");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  try {
    if (o.out) c.output = *o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.input) c.input = *o.input;
    if (!o.columns.empty()) c.columns = o.columns;
    if (o.mode) c.mode = parse_run_mode(*o.mode);
    if (o.length) c.length = *o.length;
    if (o.instances) c.instances = *o.instances;
    if (o.period) {
      if (*o.period == "auto") c.period.reset();
      else c.period = std::stol(*o.period);
    }
    if (o.method) c.method = parse_basis_method(*o.method);
    if (o.variance_target) {
      c.variance_target = *o.variance_target;
      c.k.reset();
    }
    if (o.k) c.k = *o.k;
    if (o.k_max) c.k_max = *o.k_max;
    if (o.shared) c.shared_basis = true;
    if (o.no_scale) c.scale = false;
    if (o.backend) {
      if (*o.backend == "reference") c.backend = BackendKind::Reference;
      else if (*o.backend == "remote") c.backend = BackendKind::Remote;
      else throw ConfigError("unknown backend '" + *o.backend + "'");
    }
    if (o.url) c.remote.base_url = *o.url;
    if (o.count) c.target = *o.count;
    if (o.batch_size) c.sampling.batch_size = *o.batch_size;
    if (o.temperature) c.sampling.temperature = *o.temperature;
    if (o.lambda_stop) c.lambda_stop = *o.lambda_stop;
    if (o.max_accepted) c.max_accepted = *o.max_accepted;
    if (o.max_batches) c.max_batches = *o.max_batches;
    if (o.missing_rate) c.faults.missing_rate = *o.missing_rate;
    if (o.duplicate_rate) c.faults.duplicate_rate = *o.duplicate_rate;
    if (o.outlier_rate) c.faults.outlier_rate = *o.outlier_rate;
    if (o.collapse) c.faults.collapse = true;
    if (o.metrics) c.metrics = parse_metric_list(*o.metrics);
    if (o.bins) c.metric_options.bins = *o.bins;
    if (o.max_lag) c.metric_options.max_lag = *o.max_lag;
    if (o.dtw_window) c.metric_options.dtw_window = *o.dtw_window;
    if (o.pairing) {
      if (*o.pairing == "nearest") c.metric_options.pairing = Pairing::Nearest;
      else if (*o.pairing == "index") c.metric_options.pairing = Pairing::Index;
      else throw ConfigError("unknown pairing '" + *o.pairing + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

// Stage commands only need the parts of the config they consume.
void validate_for_stage(RunConfig c, const std::string& stage) {
  if (stage != "segment" && c.input.empty()) c.input = "-";
  c.validate();
}

void print_manifest_summary(const RunManifest& m) {
  for (const auto& s : m.stages) std::cout << s.name << "  " << s.seconds << " s\n";
  for (const auto& g : m.generation)
    std::cout << "generation: " << g.stop_reason << ", " << g.totals.accepted << " accepted in " << g.batches
              << " batches\n";
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
}

std::map<Metric, double> read_report_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path + "'");
  const json j = json::parse(in);
  std::map<Metric, double> out;
  for (const auto& [name, score] : j.at("metrics").items()) out[parse_metric(name)] = score.at("value").get<double>();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic time-series generation through functional embeddings and a text-based generator"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "all stages followed by manifest.json");
  for (auto* add : {add_common, add_segment_opts, add_embed_opts, add_backend_opts, add_generate_opts, add_metric_opts})
    add(run, o);

  auto* seg = app.add_subcommand("segment", "cut the input into windows");
  add_common(seg, o);
  add_segment_opts(seg, o);

  auto* emb = app.add_subcommand("embed", "fit the basis and project the windows");
  add_common(emb, o);
  add_embed_opts(emb, o);

  auto* enc = app.add_subcommand("encode", "write the fine-tune prompt corpus");
  add_common(enc, o);

  auto* ft = app.add_subcommand("finetune", "fit the generator backend on the corpus");
  add_common(ft, o);
  add_backend_opts(ft, o);
  ft->add_option("--missing-rate", o.missing_rate);
  ft->add_option("--duplicate-rate", o.duplicate_rate);
  ft->add_option("--outlier-rate", o.outlier_rate);
  ft->add_flag("--collapse", o.collapse);

  auto* gen = app.add_subcommand("generate", "sample, parse and filter embedding rows");
  add_common(gen, o);
  add_backend_opts(gen, o);
  add_generate_opts(gen, o);

  auto* dec = app.add_subcommand("decode", "reconstruct series from the generated table");
  add_common(dec, o);

  std::string original, generated, report_out;
  auto* ev = app.add_subcommand("evaluate", "score generated windows against the originals");
  add_common(ev, o);
  add_metric_opts(ev, o);
  ev->add_option("--original", original, "windows directory (default <out>/windows)");
  ev->add_option("--generated", generated, "windows directory (default <out>/decoded)");
  ev->add_option("--report", report_out, "report path (default <out>/report/report.json)");

  std::vector<std::string> reports, names;
  std::string csv_out = "comparison.csv";
  auto* cmp = app.add_subcommand("compare", "normalize and rank several metric reports");
  cmp->add_option("reports", reports, "report.json files")->required();
  cmp->add_option("--names", names, "model names (default: report paths)")->delimiter(',');
  cmp->add_option("--csv", csv_out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::kOk : exit_code::kConfig;
  }

  try {
    if (cmp->parsed()) {
      if (!names.empty() && names.size() != reports.size()) throw ConfigError("--names must match the report count");
      std::vector<std::pair<std::string, std::map<Metric, double>>> raw;
      for (std::size_t i = 0; i < reports.size(); ++i)
        raw.emplace_back(names.empty() ? reports[i] : names[i], read_report_values(reports[i]));
      write_comparison_csv(csv_out, normalize_and_rank(raw));
      std::cout << csv_out << '\n';
      return exit_code::kOk;
    }

    const RunConfig cfg = resolve(o);
    if (run->parsed()) {
      print_manifest_summary(run_pipeline(cfg));
      std::cout << RunLayout{cfg.output}.manifest().string() << '\n';
      return exit_code::kOk;
    }

    std::filesystem::create_directories(cfg.output);
    if (seg->parsed()) {
      cfg.validate();
      stage_segment(cfg);
    } else if (emb->parsed()) {
      validate_for_stage(cfg, "embed");
      std::vector<std::string> warnings;
      stage_embed(cfg, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    } else if (enc->parsed()) {
      validate_for_stage(cfg, "encode");
      stage_encode(cfg);
    } else if (ft->parsed()) {
      validate_for_stage(cfg, "finetune");
      stage_finetune(cfg);
    } else if (gen->parsed()) {
      validate_for_stage(cfg, "generate");
      std::vector<GenerationSummary> summary;
      stage_generate(cfg, &summary);
      for (const auto& g : summary)
        std::cout << g.stop_reason << ": " << g.totals.accepted << " accepted, " << g.totals.missing << " missing, "
                  << g.totals.duplicate << " duplicate, " << g.totals.norm << " norm\n";
    } else if (dec->parsed()) {
      validate_for_stage(cfg, "decode");
      stage_decode(cfg);
    } else if (ev->parsed()) {
      validate_for_stage(cfg, "evaluate");
      if (original.empty() && generated.empty() && report_out.empty()) {
        stage_evaluate(cfg);
      } else {
        const RunLayout layout{cfg.output};
        run_stage("evaluate", [&] {
          const InstanceSet a = read_windows(original.empty() ? layout.windows() : std::filesystem::path(original));
          const InstanceSet b = read_windows(generated.empty() ? layout.decoded() : std::filesystem::path(generated));
          const std::filesystem::path dest = report_out.empty() ? layout.report() : std::filesystem::path(report_out);
          if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
          write_report(dest, evaluate(a, b, cfg.metrics, cfg.metric_options));
          return 0;
        });
      }
    }
    return exit_code::kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return exit_code::kRemote;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kStage;
  }
}
