#include "tsforge/backend.hpp"

#include "normal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace tsforge {

namespace {

// Average ranks (1-based) with ties sharing their mean rank.
Vector average_ranks(const Vector& v) {
  const Index n = v.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
  Vector ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) == v(order[static_cast<std::size_t>(i)])) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = r;
    i = j + 1;
  }
  return ranks;
}

std::uint64_t fnv1a(const std::vector<std::string>& parts) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& s : parts) {
    for (const unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

CopulaModel reference_fit(const Matrix& table) {
  const Index n = table.rows();
  const Index k = table.cols();
  if (n < 5) throw DataError("reference backend needs at least 5 training rows");
  if (k < 1) throw DataError("reference backend needs at least one feature");
  if (!table.allFinite()) throw DataError("reference backend: non-finite training values");

  CopulaModel m;
  m.rows_ = table;
  Matrix scores(n, k);
  for (Index j = 0; j < k; ++j) {
    Vector col = table.col(j);
    std::sort(col.begin(), col.end());
    m.sorted_.push_back(col);
    const Vector ranks = average_ranks(table.col(j));
    for (Index i = 0; i < n; ++i) scores(i, j) = detail::normal_quantile(ranks(i) / static_cast<double>(n + 1));
  }

  const Matrix centered = scores.rowwise() - scores.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  m.correlation_ = Matrix::Identity(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) {
      if (a == b) continue;
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      m.correlation_(a, b) = denom > 0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
    }

  Matrix regularized = m.correlation_;
  for (double ridge = 1e-6;; ridge *= 10) {
    Eigen::LLT<Matrix> llt(regularized);
    if (llt.info() == Eigen::Success) {
      m.chol_ = llt.matrixL();
      break;
    }
    regularized = m.correlation_ + ridge * Matrix::Identity(k, k);
  }
  return m;
}

double CopulaModel::quantile(Index feature, double p) const {
  const Vector& s = sorted_.at(static_cast<std::size_t>(feature));
  const double h = std::clamp(p, 0.0, 1.0) * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<Index>(std::floor(h));
  if (lo >= s.size() - 1) return s(s.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return s(lo) + frac * (s(lo + 1) - s(lo));
}

RowVector CopulaModel::sample(std::mt19937_64& rng, double temperature) const {
  std::normal_distribution<double> normal;
  Vector eps(features());
  for (Index j = 0; j < features(); ++j) eps(j) = normal(rng);
  const Vector z = std::sqrt(temperature) * (chol_ * eps);
  RowVector out(features());
  for (Index j = 0; j < features(); ++j) out(j) = quantile(j, detail::normal_cdf(z(j)));
  return out;
}

BackendHandle ReferenceBackend::fine_tune(const std::vector<std::string>& prompts, const TrainingParams& hyper) {
  hyper.validate();
  if (prompts.empty()) throw DataError("fine_tune: empty prompt corpus");
  const Index k = features_in_prompt(prompts.front());
  if (k < 1) throw DataError("fine_tune: first prompt has no value slots");
  auto fitted = std::make_shared<Fitted>();
  fitted->pooled = reference_fit(rows_from_corpus(prompts, k, opts_.prompt));
  std::map<std::string, std::vector<std::string>> labelled;
  for (const auto& p : prompts)
    if (auto cond = parse_generation(p, k, opts_.prompt).condition) labelled[*cond].push_back(p);
  for (const auto& [label, group] : labelled) {
    const Matrix rows = rows_from_corpus(group, k, opts_.prompt);
    if (rows.rows() >= 5) fitted->by_condition.emplace(label, reference_fit(rows));
  }

  char id[32];
  std::snprintf(id, sizeof id, "reference-%016llx", static_cast<unsigned long long>(fnv1a(prompts)));
  std::lock_guard lock(mutex_);
  models_[id] = std::move(fitted);
  return {BackendKind::Reference, id, true};
}

std::shared_ptr<const ReferenceBackend::Fitted> ReferenceBackend::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = models_.find(id);
  if (it == models_.end()) throw BackendError("unknown model '" + id + "'");
  return it->second;
}

const CopulaModel& ReferenceBackend::model(const std::string& id) const { return find(id)->pooled; }

const CopulaModel& ReferenceBackend::model(const std::string& id, const std::string& condition) const {
  const auto fitted = find(id);
  const auto it = fitted->by_condition.find(condition);
  return it == fitted->by_condition.end() ? fitted->pooled : it->second;
}

std::vector<std::string> ReferenceBackend::generate(const BackendHandle& handle, const std::vector<std::string>& prompts,
                                                    const SamplingParams& params) const {
  params.validate();
  if (!handle.fitted || handle.kind != BackendKind::Reference) throw BackendError("generate needs a fitted reference handle");
  const auto fitted = find(handle.model_id);
  const Index k = fitted->pooled.features();
  const FaultModes& faults = opts_.faults;

  std::mt19937_64 rng(params.seed.value_or(std::random_device{}()));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<ChannelSpan> spans = opts_.spans;
  if (spans.empty()) spans.push_back({"all", 0, k});

  const auto median_norm_row = [](const CopulaModel& m) -> RowVector {
    const Vector norms = m.training_rows().rowwise().squaredNorm();
    std::vector<Index> order(static_cast<std::size_t>(norms.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms(a) < norms(b); });
    return m.training_rows().row(order[order.size() / 2]);
  };

  std::vector<RowVector> emitted;
  std::vector<std::string> out;
  out.reserve(prompts.size());
  for (const auto& prompt : prompts) {
    Permutation perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), Index{0});
    const ParsedRow header = parse_generation(prompt, k, opts_.prompt);
    if (const auto& read = header.permutation;
        read && read->size() == perm.size() && std::is_permutation(read->begin(), read->end(), perm.begin()))
      perm = *read;
    const auto cond_it = header.condition ? fitted->by_condition.find(*header.condition) : fitted->by_condition.end();
    const CopulaModel& m = cond_it == fitted->by_condition.end() ? fitted->pooled : cond_it->second;

    const double u_dup = unit(rng);
    const double u_out = unit(rng);
    const double u_miss = unit(rng);

    RowVector row;
    if (u_dup < faults.duplicate_rate) {
      const Index pool = static_cast<Index>(emitted.size()) + m.training_rows().rows();
      const auto pick = std::uniform_int_distribution<Index>(0, pool - 1)(rng);
      row = pick < static_cast<Index>(emitted.size()) ? emitted[static_cast<std::size_t>(pick)]
                                                      : RowVector(m.training_rows().row(pick - static_cast<Index>(emitted.size())));
    } else if (faults.collapse) {
      row = median_norm_row(m);
      for (const auto& span : spans) {
        auto block = row.segment(span.start, span.width);
        std::shuffle(block.begin(), block.end(), rng);
        for (Index j = 0; j < span.width; ++j)
          if (unit(rng) < 0.5) block(j) = -block(j);
      }
    } else {
      row = m.sample(rng, params.temperature);
    }
    if (u_out < faults.outlier_rate) row *= faults.outlier_scale;

    std::string text = prompt;
    const Index answered = u_miss < faults.missing_rate ? k - 1 : k;
    RowVector rounded(k);
    for (Index s = 0; s < k; ++s) {
      const Index feature = perm[static_cast<std::size_t>(s)];
      const std::string v = format_value(row(feature), opts_.prompt.precision);
      rounded(feature) = std::stod(v);
      if (s < answered) text += " " + v + " " + opts_.prompt.answer;
    }
    emitted.push_back(rounded);
    out.push_back(std::move(text));
  }
  return out;
}

}  // namespace tsforge
