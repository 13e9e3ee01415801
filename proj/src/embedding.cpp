#include "tsforge/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tsforge {

std::string to_string(BasisMethod m) { return m == BasisMethod::FPC ? "fpc" : "fica"; }

BasisMethod parse_basis_method(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "fpc") return BasisMethod::FPC;
  if (lower == "fica" || lower == "ica" || lower == "fastica") return BasisMethod::FICA;
  throw DataError("unknown basis method '" + s + "' (expected fpc or fica)");
}

Index BasisSystem::total_components() const {
  Index k = 0;
  for (const auto& ch : channels) k += ch.k();
  return k;
}

std::vector<ChannelSpan> spans_for(const BasisSystem& basis) {
  std::vector<ChannelSpan> spans;
  Index start = 0;
  for (const auto& ch : basis.channels) {
    spans.push_back({ch.name, start, ch.k()});
    start += ch.k();
  }
  return spans;
}

void normalize_signs(Matrix& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    Index at = 0;
    rows.row(r).cwiseAbs().maxCoeff(&at);
    if (rows(r, at) < 0) rows.row(r) *= -1.0;
  }
}

namespace {

void check_k(const InstanceSet& x, Index channel, Index k) {
  if (channel < 0 || channel >= x.channels()) throw DataError("channel index out of range");
  if (x.instances() < 2) throw DataError("basis fitting needs at least 2 instances");
  const Index cap = std::min(x.instances(), x.length());
  if (k < 1 || k > cap)
    throw DataError("k = " + std::to_string(k) + " outside [1, " + std::to_string(cap) + "]");
}

Index numerical_rank(const Vector& singular, Index rows, Index cols) {
  if (singular.size() == 0) return 0;
  const double tol = singular(0) * static_cast<double>(std::max(rows, cols)) *
                     std::numeric_limits<double>::epsilon();
  return (singular.array() > tol).count();
}

// (W W^T)^{-1/2} W
Matrix symmetric_decorrelation(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(w * w.transpose());
  const Vector inv_sqrt = es.eigenvalues().array().max(1e-300).rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

}  // namespace

ChannelBasis fit_fpc(const InstanceSet& x, Index channel, Index k) {
  check_k(x, channel, k);
  const Matrix& windows = x.channel(channel);
  ChannelBasis out;
  out.name = x.channel_names()[static_cast<std::size_t>(channel)];
  out.mean_curve = windows.colwise().mean().transpose();
  const Matrix centered = windows.rowwise() - out.mean_curve.transpose();

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  out.basis = svd.matrixV().leftCols(k).transpose();
  normalize_signs(out.basis);
  out.eigenvalues = sv.head(k).array().square() / static_cast<double>(x.instances() - 1);

  const Index rank = numerical_rank(sv, centered.rows(), centered.cols());
  if (rank < k)
    out.warnings.push_back("rank " + std::to_string(rank) + " below k = " + std::to_string(k) +
                           "; trailing eigenvalues are ~0");
  return out;
}

ChannelBasis fit_fastica(const InstanceSet& x, Index channel, Index k, const FastIcaOptions& opts) {
  check_k(x, channel, k);
  const Matrix& windows = x.channel(channel);
  ChannelBasis out;
  out.name = x.channel_names()[static_cast<std::size_t>(channel)];
  out.mean_curve = windows.colwise().mean().transpose();
  const Matrix centered = windows.rowwise() - out.mean_curve.transpose();
  const Index length = centered.cols();

  // Time points are the samples, instances the observed variables.
  Eigen::BDCSVD<Matrix> svd(centered.transpose(), Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const Index rank = numerical_rank(sv, length, centered.rows());
  if (rank < k)
    out.warnings.push_back("rank " + std::to_string(rank) + " below k = " + std::to_string(k) +
                           "; some components are arbitrary");
  const Matrix white = svd.matrixU().leftCols(k) * std::sqrt(static_cast<double>(length));  // L x k

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Matrix w(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) w(i, j) = normal(rng);
  w = symmetric_decorrelation(w);

  out.converged = false;
  const double inv_len = 1.0 / static_cast<double>(length);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix proj = white * w.transpose();  // L x k
    const Matrix g = proj.array().tanh();
    const Vector g_prime_mean = (1.0 - g.array().square()).colwise().mean().transpose();
    Matrix next = (g.transpose() * white) * inv_len - g_prime_mean.asDiagonal() * w;
    next = symmetric_decorrelation(next);
    const double change = (1.0 - (next * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
    w = std::move(next);
    out.iterations = it;
    if (change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged)
    out.warnings.push_back("FastICA did not converge in " + std::to_string(opts.max_iter) + " iterations");

  Matrix components = (white * w.transpose()).transpose();  // k x L
  components.rowwise().normalize();
  normalize_signs(components);

  const double total = centered.squaredNorm();
  std::vector<std::pair<double, Index>> order;
  for (Index j = 0; j < k; ++j)
    order.emplace_back(total > 0 ? (centered * components.row(j).transpose()).squaredNorm() / total : 0.0, j);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  out.basis.resize(k, length);
  for (Index j = 0; j < k; ++j) out.basis.row(j) = components.row(order[static_cast<std::size_t>(j)].second);
  return out;
}

BasisSystem fit_basis(const InstanceSet& x, BasisMethod method, const std::vector<Index>& k,
                      const FastIcaOptions& opts) {
  if (static_cast<Index>(k.size()) != x.channels() && k.size() != 1)
    throw DataError("need one k per channel (or a single k for all)");
  BasisSystem out;
  out.method = method;
  for (Index c = 0; c < x.channels(); ++c) {
    const Index kc = k.size() == 1 ? k.front() : k[static_cast<std::size_t>(c)];
    FastIcaOptions channel_opts = opts;
    channel_opts.seed = opts.seed + static_cast<std::uint64_t>(c);
    out.channels.push_back(method == BasisMethod::FPC ? fit_fpc(x, c, kc) : fit_fastica(x, c, kc, channel_opts));
  }
  return out;
}

BasisSystem fit_shared_basis(const InstanceSet& x, BasisMethod method, Index k, const FastIcaOptions& opts) {
  Matrix pooled(x.instances() * x.channels(), x.length());
  for (Index c = 0; c < x.channels(); ++c) pooled.middleRows(c * x.instances(), x.instances()) = x.channel(c);
  const InstanceSet stacked({pooled}, {"shared"});
  const ChannelBasis shared = method == BasisMethod::FPC ? fit_fpc(stacked, 0, k) : fit_fastica(stacked, 0, k, opts);
  BasisSystem out;
  out.method = method;
  out.shared = true;
  for (const auto& name : x.channel_names()) {
    ChannelBasis ch = shared;
    ch.name = name;
    out.channels.push_back(std::move(ch));
  }
  return out;
}

Matrix project(const Matrix& windows, const ChannelBasis& basis, BasisMethod method) {
  if (windows.cols() != basis.length()) throw DataError("window length does not match the basis length");
  const Matrix centered = windows.rowwise() - basis.mean_curve.transpose();
  if (method == BasisMethod::FPC) return centered * basis.basis.transpose();
  // argmin_E ||Xc - E B||_F
  return basis.basis.transpose().completeOrthogonalDecomposition().solve(centered.transpose()).transpose();
}

EmbeddingTable embed(const InstanceSet& x, const BasisSystem& basis) {
  if (static_cast<Index>(basis.channels.size()) != x.channels())
    throw DataError("basis channel count does not match the instance set");
  EmbeddingTable out;
  out.spans = spans_for(basis);
  out.values.resize(x.instances(), basis.total_components());
  for (Index c = 0; c < x.channels(); ++c) {
    const auto& span = out.spans[static_cast<std::size_t>(c)];
    out.values.middleCols(span.start, span.width) =
        project(x.channel(c), basis.channels[static_cast<std::size_t>(c)], basis.method);
  }
  out.row_ids.resize(static_cast<std::size_t>(x.instances()));
  std::iota(out.row_ids.begin(), out.row_ids.end(), Index{0});
  return out;
}

InstanceSet reconstruct(const EmbeddingTable& e, const BasisSystem& basis) {
  if (e.spans.size() != basis.channels.size()) throw DataError("table spans do not match the basis channels");
  std::vector<Matrix> channels;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < basis.channels.size(); ++c) {
    const auto& ch = basis.channels[c];
    const auto& span = e.spans[c];
    if (span.width != ch.k() || span.start + span.width > e.cols())
      throw DataError("span of channel '" + ch.name + "' does not match its basis");
    Matrix series = e.values.middleCols(span.start, span.width) * ch.basis;
    series.rowwise() += ch.mean_curve.transpose();
    channels.push_back(std::move(series));
    names.push_back(ch.name);
  }
  return InstanceSet(std::move(channels), std::move(names));
}

std::vector<double> variance_retained(const InstanceSet& x, const BasisSystem& basis) {
  if (static_cast<Index>(basis.channels.size()) != x.channels())
    throw DataError("basis channel count does not match the instance set");
  std::vector<double> out;
  for (Index c = 0; c < x.channels(); ++c) {
    const auto& ch = basis.channels[static_cast<std::size_t>(c)];
    const Matrix centered = x.channel(c).rowwise() - ch.mean_curve.transpose();
    const double total = centered.squaredNorm();
    if (!(total > 0)) throw DataError("variance_retained: channel '" + ch.name + "' has zero total variance");
    const Matrix fitted = project(x.channel(c), ch, basis.method) * ch.basis;
    out.push_back(std::clamp(1.0 - (centered - fitted).squaredNorm() / total, 0.0, 1.0));
  }
  return out;
}

KSelection select_k(const InstanceSet& x, BasisMethod method, double target, Index k_max,
                    const FastIcaOptions& opts) {
  if (!(target > 0.0 && target <= 1.0)) throw DataError("select_k: target must lie in (0, 1]");
  const Index cap = std::min({k_max, x.instances() - 1, x.length()});
  if (cap < 1) throw DataError("select_k: no admissible k");
  constexpr double kSlack = 1e-12;
  KSelection out;
  for (Index c = 0; c < x.channels(); ++c) {
    const InstanceSet one = x.select_channel(c);
    BasisSystem sys;
    sys.method = method;
    ChannelBasis full;
    if (method == BasisMethod::FPC) full = fit_fpc(one, 0, cap);
    Index chosen = cap;
    double retained = -1.0;
    for (Index k = 1; k <= cap; ++k) {
      ChannelBasis b;
      if (method == BasisMethod::FPC) {
        b = full;
        b.basis = full.basis.topRows(k);
        b.eigenvalues = full.eigenvalues.head(k);
      } else {
        b = fit_fastica(one, 0, k, opts);
      }
      sys.channels = {b};
      retained = variance_retained(one, sys).front();
      if (retained >= target - kSlack) {
        chosen = k;
        break;
      }
    }
    if (retained < target - kSlack)
      out.warnings.push_back("channel '" + one.channel_names().front() + "': target " + std::to_string(target) +
                             " unreachable, using k = " + std::to_string(cap));
    out.k.push_back(chosen);
    out.retained.push_back(retained);
  }
  return out;
}

}  // namespace tsforge
