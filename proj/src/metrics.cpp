#include "tsforge/metrics.hpp"

#include "tsforge/segmentation.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

namespace tsforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_compatible(const InstanceSet& orig, const InstanceSet& gen) {
  if (orig.channels() != gen.channels()) throw DataError("original and generated sets have different channel counts");
  if (orig.length() != gen.length()) throw DataError("original and generated sets have different lengths");
  if (orig.instances() < 1 || gen.instances() < 1) throw DataError("empty instance set");
}

MetricScore finish(std::vector<double> per_channel, std::vector<std::string> warnings = {}) {
  MetricScore s;
  double sum = 0;
  int used = 0;
  for (const double v : per_channel)
    if (!std::isnan(v)) {
      sum += v;
      ++used;
    }
  if (used == 0) throw DataError("no channel could be scored");
  s.value = sum / used;
  s.per_channel = std::move(per_channel);
  s.warnings = std::move(warnings);
  return s;
}

// Runs body(i) for i in [0, n) across hardware threads.
void parallel_for(Index n, const std::function<void(Index)>& body) {
  const Index workers = std::min<Index>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (Index i = w; i < n; i += workers) body(i);
    });
  for (auto& t : pool) t.join();
}

template <typename Distance>
MetricScore distance_metric(const InstanceSet& orig, const InstanceSet& gen, Pairing pairing, Distance&& distance) {
  check_compatible(orig, gen);
  if (pairing == Pairing::Index && orig.instances() != gen.instances())
    throw DataError("index pairing needs equally sized sets");
  std::vector<double> per_channel;
  for (Index c = 0; c < orig.channels(); ++c) {
    const Matrix& o = orig.channel(c);
    const Matrix& g = gen.channel(c);
    Vector best(g.rows());
    parallel_for(g.rows(), [&](Index i) {
      if (pairing == Pairing::Index) {
        best(i) = distance(g.row(i), o.row(i));
        return;
      }
      double b = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < o.rows(); ++j) b = std::min(b, distance(g.row(i), o.row(j)));
      best(i) = b;
    });
    per_channel.push_back(best.mean());
  }
  return finish(std::move(per_channel));
}

}  // namespace

std::string to_string(Metric m) {
  switch (m) {
    case Metric::MDD: return "mdd";
    case Metric::ACD: return "acd";
    case Metric::SD: return "sd";
    case Metric::KD: return "kd";
    case Metric::ED: return "ed";
    case Metric::DTW: return "dtw";
  }
  return "?";
}

Metric parse_metric(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  for (const Metric m : kAllMetrics)
    if (to_string(m) == lower) return m;
  throw DataError("unknown metric '" + s + "'");
}

std::vector<Metric> parse_metric_list(const std::string& csv) {
  std::vector<Metric> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_metric(item));
  if (out.empty()) throw DataError("empty metric list");
  return out;
}

bool is_feature_metric(Metric m) { return m == Metric::MDD || m == Metric::ACD || m == Metric::SD || m == Metric::KD; }

MetricScore mdd(const InstanceSet& orig, const InstanceSet& gen, Index bins) {
  check_compatible(orig, gen);
  if (bins < 2) throw DataError("mdd: need at least 2 bins");
  const auto n_orig = static_cast<double>(orig.instances());
  const auto n_gen = static_cast<double>(gen.instances());
  std::vector<double> per_channel;
  Vector f_orig(bins), f_gen(bins);
  for (Index c = 0; c < orig.channels(); ++c) {
    double channel_sum = 0;
    for (Index t = 0; t < orig.length(); ++t) {
      const auto o = orig.channel(c).col(t);
      const auto g = gen.channel(c).col(t);
      double lo = o.minCoeff();
      double hi = o.maxCoeff();
      if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
      }
      const double width = (hi - lo) / static_cast<double>(bins);
      const auto bin_of = [&](double v) {
        return std::min<Index>(bins - 1, static_cast<Index>(std::floor((v - lo) / width)));
      };
      f_orig.setZero();
      f_gen.setZero();
      for (Index i = 0; i < o.size(); ++i) f_orig(bin_of(o(i))) += 1.0 / n_orig;
      for (Index i = 0; i < g.size(); ++i)
        if (g(i) >= lo && g(i) <= hi) f_gen(bin_of(g(i))) += 1.0 / n_gen;
      channel_sum += (f_orig - f_gen).cwiseAbs().mean();
    }
    per_channel.push_back(channel_sum / static_cast<double>(orig.length()));
  }
  return finish(std::move(per_channel));
}

MetricScore acd(const InstanceSet& orig, const InstanceSet& gen, Index max_lag) {
  check_compatible(orig, gen);
  if (max_lag < 1 || max_lag >= orig.length()) throw DataError("acd: max_lag must lie in [1, L)");
  const auto mean_acf = [&](const Matrix& windows) -> std::optional<Vector> {
    Vector sum = Vector::Zero(max_lag);
    Index used = 0;
    for (Index i = 0; i < windows.rows(); ++i) {
      const Vector row = windows.row(i).transpose();
      if (row.maxCoeff() == row.minCoeff()) continue;
      sum += autocorrelation(row, max_lag).tail(max_lag);
      ++used;
    }
    if (used == 0) return std::nullopt;
    return sum / static_cast<double>(used);
  };
  std::vector<double> per_channel;
  std::vector<std::string> warnings;
  for (Index c = 0; c < orig.channels(); ++c) {
    const auto a = mean_acf(orig.channel(c));
    const auto b = mean_acf(gen.channel(c));
    if (!a || !b) {
      warnings.push_back("acd: channel '" + orig.channel_names()[static_cast<std::size_t>(c)] + "' is constant, skipped");
      per_channel.push_back(kNaN);
      continue;
    }
    per_channel.push_back((*a - *b).cwiseAbs().mean());
  }
  return finish(std::move(per_channel), std::move(warnings));
}

MetricScore sd(const InstanceSet& orig, const InstanceSet& gen) {
  check_compatible(orig, gen);
  std::vector<double> per_channel;
  for (Index c = 0; c < orig.channels(); ++c)
    per_channel.push_back(
        std::abs(standardized_moments(gen.channel(c)).first - standardized_moments(orig.channel(c)).first));
  return finish(std::move(per_channel));
}

MetricScore kd(const InstanceSet& orig, const InstanceSet& gen) {
  check_compatible(orig, gen);
  std::vector<double> per_channel;
  for (Index c = 0; c < orig.channels(); ++c)
    per_channel.push_back(
        std::abs(standardized_moments(gen.channel(c)).second - standardized_moments(orig.channel(c)).second));
  return finish(std::move(per_channel));
}

MetricScore ed(const InstanceSet& orig, const InstanceSet& gen, Pairing pairing) {
  return distance_metric(orig, gen, pairing, [](const auto& a, const auto& b) { return euclidean_distance(a, b); });
}

MetricScore dtw(const InstanceSet& orig, const InstanceSet& gen, std::optional<Index> window, Pairing pairing) {
  return distance_metric(orig, gen, pairing, [&](const auto& a, const auto& b) { return dtw_distance(a, b, window); });
}

MetricReport evaluate(const InstanceSet& orig, const InstanceSet& gen, const std::vector<Metric>& metrics,
                      const MetricOptions& opts) {
  check_compatible(orig, gen);
  MetricReport r;
  r.channel_names = orig.channel_names();
  r.bins = opts.bins.value_or(
      std::max<Index>(2, static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(orig.instances()))))));
  r.max_lag = opts.max_lag.value_or(std::max<Index>(1, orig.length() / 2));
  r.dtw_window = opts.dtw_window;
  r.pairing = opts.pairing;
  for (const Metric m : metrics) {
    switch (m) {
      case Metric::MDD: r.scores[m] = mdd(orig, gen, r.bins); break;
      case Metric::ACD: r.scores[m] = acd(orig, gen, r.max_lag); break;
      case Metric::SD: r.scores[m] = sd(orig, gen); break;
      case Metric::KD: r.scores[m] = kd(orig, gen); break;
      case Metric::ED: r.scores[m] = ed(orig, gen, opts.pairing); break;
      case Metric::DTW: r.scores[m] = dtw(orig, gen, opts.dtw_window, opts.pairing); break;
    }
  }
  return r;
}

void write_report(const std::filesystem::path& path, const MetricReport& report) {
  nlohmann::json j;
  j["channels"] = report.channel_names;
  for (const auto& [metric, score] : report.scores) {
    nlohmann::json per = nlohmann::json::array();
    for (const double v : score.per_channel) per.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    j["metrics"][to_string(metric)] = {{"value", score.value}, {"per_channel", per}, {"warnings", score.warnings}};
  }
  j["metadata"] = {{"mdd_bins", report.bins},
                   {"acd_max_lag", report.max_lag},
                   {"dtw_window", report.dtw_window ? nlohmann::json(*report.dtw_window) : nlohmann::json(nullptr)},
                   {"dtw_local_cost", "squared difference, sqrt of path sum"},
                   {"pairing", report.pairing == Pairing::Nearest ? "nearest-original" : "index"}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Vector average_ranks_ascending(const Vector& scores) {
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  Vector ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && scores(order[static_cast<std::size_t>(j + 1)]) == scores(order[static_cast<std::size_t>(i)])) ++j;
    for (Index t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return ranks;
}

ComparisonTable normalize_and_rank(const std::vector<std::pair<std::string, std::map<Metric, double>>>& raw) {
  if (raw.size() < 2) throw DataError("normalize_and_rank needs at least 2 models");
  ComparisonTable t;
  for (const auto& [metric, _] : raw.front().second) t.metrics.push_back(metric);
  if (t.metrics.empty()) throw DataError("normalize_and_rank: no metrics");
  const auto n_models = static_cast<Index>(raw.size());
  const auto n_metrics = static_cast<Index>(t.metrics.size());
  t.raw.resize(n_models, n_metrics);
  for (Index i = 0; i < n_models; ++i) {
    const auto& [name, scores] = raw[static_cast<std::size_t>(i)];
    if (scores.size() != t.metrics.size()) throw DataError("model '" + name + "' has an inconsistent metric set");
    t.models.push_back(name);
    for (Index j = 0; j < n_metrics; ++j) {
      const auto it = scores.find(t.metrics[static_cast<std::size_t>(j)]);
      if (it == scores.end()) throw DataError("model '" + name + "' has an inconsistent metric set");
      t.raw(i, j) = it->second;
    }
  }
  t.normalized.resize(n_models, n_metrics);
  Matrix ranks(n_models, n_metrics);
  for (Index j = 0; j < n_metrics; ++j) {
    const double lo = t.raw.col(j).minCoeff();
    const double hi = t.raw.col(j).maxCoeff();
    if (hi > lo)
      t.normalized.col(j) = (t.raw.col(j).array() - lo) / (hi - lo);
    else
      t.normalized.col(j).setZero();
    ranks.col(j) = average_ranks_ascending(t.raw.col(j));
  }
  const auto group_mean = [&](bool feature) {
    Vector out = Vector::Constant(n_models, kNaN);
    std::vector<Index> cols;
    for (Index j = 0; j < n_metrics; ++j)
      if (is_feature_metric(t.metrics[static_cast<std::size_t>(j)]) == feature) cols.push_back(j);
    if (cols.empty()) return out;
    out.setZero();
    for (const Index j : cols) out += t.normalized.col(j);
    return Vector(out / static_cast<double>(cols.size()));
  };
  t.feature_average = group_mean(true);
  t.distance_average = group_mean(false);
  t.average_rank = ranks.rowwise().mean();
  return t;
}

void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "model";
  for (const Metric m : table.metrics) {
    std::string name = to_string(m);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    out << ',' << name;
  }
  out << ",Feat.,Dist.,Rank\n";
  const auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };
  for (std::size_t i = 0; i < table.models.size(); ++i) {
    const auto r = static_cast<Index>(i);
    out << table.models[i];
    for (Index j = 0; j < table.raw.cols(); ++j) out << ',' << cell(table.raw(r, j));
    out << ',' << cell(table.feature_average(r)) << ',' << cell(table.distance_average(r)) << ','
        << cell(table.average_rank(r)) << '\n';
  }
}

}  // namespace tsforge
