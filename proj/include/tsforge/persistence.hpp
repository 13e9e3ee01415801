#ifndef TSFORGE_PERSISTENCE_HPP
#define TSFORGE_PERSISTENCE_HPP

#include "tsforge/core_data.hpp"
#include "tsforge/embedding.hpp"
#include "tsforge/segmentation.hpp"

#include <filesystem>

namespace tsforge {

/// Directory with one CSV per channel (header t0..t{L-1}, one instance per row) and an
/// index.json holding channel order and window offsets.
void write_windows(const std::filesystem::path& dir, const InstanceSet& x);
InstanceSet read_windows(const std::filesystem::path& dir);

void write_plan(const std::filesystem::path& path, const SegmentationPlan& plan);
SegmentationPlan read_plan(const std::filesystem::path& path);

void write_scaler(const std::filesystem::path& path, const ScalerState& s);
ScalerState read_scaler(const std::filesystem::path& path);

/// {method, shared, channels:[{name, k, mean_curve, basis, eigenvalues}], diagnostics}
void write_basis(const std::filesystem::path& path, const BasisSystem& basis);
BasisSystem read_basis(const std::filesystem::path& path);

/// CSV with header value_1..value_K plus `<path>.json` sidecar with spans and row ids.
void write_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_table(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& table_csv);

}  // namespace tsforge

#endif  // TSFORGE_PERSISTENCE_HPP
