#include "tsforge/core_data.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tsforge {

void RawSeries::validate() const {
  if (channels.empty()) throw DataError("series has no channels");
  std::set<std::string> seen;
  const Index n = length();
  if (n < 2) throw DataError("series must have at least 2 samples");
  for (const auto& ch : channels) {
    if (!seen.insert(ch.name).second) throw DataError("duplicate channel name '" + ch.name + "'");
    if (ch.values.size() != n) throw DataError("channel '" + ch.name + "' has a different length");
    if (!ch.values.allFinite()) throw DataError("channel '" + ch.name + "' contains non-finite values");
  }
  if (!timestamps.empty() && static_cast<Index>(timestamps.size()) != n)
    throw DataError("timestamp column length does not match the channels");
}

InstanceSet::InstanceSet(std::vector<Matrix> channels, std::vector<std::string> names,
                         std::vector<Index> origin_offsets)
    : data_(std::move(channels)), names_(std::move(names)), offsets_(std::move(origin_offsets)) {
  if (data_.empty()) throw DataError("instance set needs at least one channel");
  if (names_.empty())
    for (std::size_t c = 0; c < data_.size(); ++c) names_.push_back("ch" + std::to_string(c));
  if (names_.size() != data_.size()) throw DataError("channel name count does not match channel count");
  const Index rows = data_.front().rows();
  const Index cols = data_.front().cols();
  if (rows < 1) throw DataError("instance set needs at least one instance");
  if (cols < 2) throw DataError("instances must have length >= 2");
  for (std::size_t c = 0; c < data_.size(); ++c) {
    if (data_[c].rows() != rows || data_[c].cols() != cols)
      throw DataError("channel '" + names_[c] + "' has a different shape");
    if (!data_[c].allFinite()) throw DataError("channel '" + names_[c] + "' contains non-finite values");
  }
  if (!offsets_.empty() && static_cast<Index>(offsets_.size()) != rows)
    throw DataError("origin offsets must have one entry per instance");
}

InstanceSet InstanceSet::select_channel(Index c) const {
  return InstanceSet({channel(c)}, {names_.at(static_cast<std::size_t>(c))}, offsets_);
}

std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> ScalerState::degenerate() const {
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> out;
  out.reserve(std.size());
  for (const auto& s : std) out.push_back(s.array() < kStdFloor);
  return out;
}

RawSeries load_dataset(const std::filesystem::path& path, const ColumnSchema& schema) {
  const csv::Table table = csv::read(path);
  const auto& header = table.header;

  std::vector<std::size_t> picked;
  std::optional<std::size_t> ts_col;
  if (!header.empty() && header.front() == "timestamp") ts_col = 0;

  if (schema.columns.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!ts_col || j != *ts_col) picked.push_back(j);
  } else {
    for (const auto& name : schema.columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw DataError("column '" + name + "' not found in '" + path.string() + "'");
      picked.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (picked.empty()) throw DataError("'" + path.string() + "': no value columns");

  RawSeries series;
  const auto n = static_cast<Index>(table.rows.size());
  for (const std::size_t j : picked) series.channels.push_back({header[j], Vector(n)});
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const auto v = csv::parse_number(row[picked[k]]);
      if (!v || !std::isfinite(*v))
        throw DataError("row " + std::to_string(i + 1) + ", column '" + header[picked[k]] +
                        "': not a finite number");
      series.channels[k].values(i) = *v;
    }
    if (ts_col) series.timestamps.push_back(row[*ts_col]);
  }
  series.validate();
  return series;
}

void write_dataset(const std::filesystem::path& path, const RawSeries& series) {
  series.validate();
  std::vector<std::string> header;
  Matrix m(series.length(), series.channel_count());
  for (Index c = 0; c < series.channel_count(); ++c) {
    header.push_back(series.channels[static_cast<std::size_t>(c)].name);
    m.col(c) = series.channels[static_cast<std::size_t>(c)].values;
  }
  if (series.timestamps.empty()) {
    csv::write_matrix(path, header, m);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "timestamp";
  for (const auto& h : header) out << ',' << h;
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    out << series.timestamps[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) out << ',' << csv::format_exact(m(i, j));
    out << '\n';
  }
}

ScalerState fit_scaler(const InstanceSet& x) {
  if (x.instances() < 2) throw DataError("fit_scaler needs at least 2 instances");
  ScalerState s;
  s.channel_names = x.channel_names();
  const double denom = static_cast<double>(x.instances() - 1);
  for (const Matrix& ch : x.data()) {
    const RowVector mean = ch.colwise().mean();
    const Matrix centered = ch.rowwise() - mean;
    s.mean.push_back(mean.transpose());
    s.std.push_back((centered.colwise().squaredNorm() / denom).array().sqrt().transpose());
  }
  return s;
}

namespace {

void check_shape(const InstanceSet& x, const ScalerState& s) {
  if (static_cast<Index>(s.mean.size()) != x.channels() || s.std.size() != s.mean.size())
    throw DataError("scaler channel count does not match the instance set");
  for (std::size_t c = 0; c < s.mean.size(); ++c)
    if (s.mean[c].size() != x.length() || s.std[c].size() != x.length())
      throw DataError("scaler length does not match the instance length");
}

RowVector floored(const Vector& std) {
  return std.array().max(ScalerState::kStdFloor).matrix().transpose();
}

}  // namespace

InstanceSet apply_scaler(const InstanceSet& x, const ScalerState& s) {
  check_shape(x, s);
  std::vector<Matrix> out;
  for (std::size_t c = 0; c < s.mean.size(); ++c) {
    const Matrix centered = x.data()[c].rowwise() - s.mean[c].transpose();
    out.push_back(centered.array().rowwise() / floored(s.std[c]).array());
  }
  return InstanceSet(std::move(out), x.channel_names(), x.origin_offsets());
}

InstanceSet invert_scaler(const InstanceSet& x, const ScalerState& s) {
  check_shape(x, s);
  std::vector<Matrix> out;
  for (std::size_t c = 0; c < s.mean.size(); ++c) {
    const Matrix scaled = x.data()[c].array().rowwise() * floored(s.std[c]).array();
    out.push_back(scaled.rowwise() + s.mean[c].transpose());
  }
  return InstanceSet(std::move(out), x.channel_names(), x.origin_offsets());
}

}  // namespace tsforge
