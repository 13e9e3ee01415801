#ifndef TSFORGE_CORE_DATA_HPP
#define TSFORGE_CORE_DATA_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsforge {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, shape mismatches, violated preconditions.
class DataError : public Error {
public:
  using Error::Error;
};

/// One named variable of a long series.
struct Channel {
  std::string name;
  Vector values;
};

/// A single long (possibly multivariate) series as ingested from CSV.
struct RawSeries {
  std::vector<Channel> channels;
  std::vector<std::string> timestamps;  // empty when the source had none

  Index length() const { return channels.empty() ? 0 : channels.front().values.size(); }
  Index channel_count() const { return static_cast<Index>(channels.size()); }

  /// Throws DataError unless channels are non-empty, unique, equal length >= 2 and finite.
  void validate() const;
};

/// I instances x C channels x L samples. Channel c is stored as an I x L matrix,
/// one instance per row.
class InstanceSet {
public:
  InstanceSet() = default;
  InstanceSet(std::vector<Matrix> channels, std::vector<std::string> names,
              std::vector<Index> origin_offsets = {});

  Index instances() const { return data_.empty() ? 0 : data_.front().rows(); }
  Index channels() const { return static_cast<Index>(data_.size()); }
  Index length() const { return data_.empty() ? 0 : data_.front().cols(); }

  const Matrix& channel(Index c) const { return data_.at(static_cast<std::size_t>(c)); }
  const std::vector<Matrix>& data() const { return data_; }
  const std::vector<std::string>& channel_names() const { return names_; }
  const std::vector<Index>& origin_offsets() const { return offsets_; }

  /// Single-channel view of channel c.
  InstanceSet select_channel(Index c) const;

private:
  std::vector<Matrix> data_;
  std::vector<std::string> names_;
  std::vector<Index> offsets_;
};

/// Per-timestamp standardization statistics, one (mean, std) pair of length L per channel.
struct ScalerState {
  static constexpr double kStdFloor = 1e-8;

  std::vector<std::string> channel_names;
  std::vector<Vector> mean;
  std::vector<Vector> std;

  /// True where the fitted std is below the floor and scaling divides by kStdFloor.
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> degenerate() const;
};

/// Column selection for load_dataset. Empty selection means every non-timestamp column.
struct ColumnSchema {
  std::vector<std::string> columns;
};

RawSeries load_dataset(const std::filesystem::path& path, const ColumnSchema& schema = {});
void write_dataset(const std::filesystem::path& path, const RawSeries& series);

ScalerState fit_scaler(const InstanceSet& x);
InstanceSet apply_scaler(const InstanceSet& x, const ScalerState& s);
InstanceSet invert_scaler(const InstanceSet& x, const ScalerState& s);

}  // namespace tsforge

#endif  // TSFORGE_CORE_DATA_HPP
