#include "tsforge/persistence.hpp"

#include "csv.hpp"

#include <json.hpp>

#include <fstream>

namespace tsforge {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing artifact '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

Matrix matrix_from(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from(j[i]);
    if (row.size() != cols) throw DataError("ragged matrix in JSON artifact");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

std::string file_name_for(const std::string& channel) {
  std::string s;
  for (const char ch : channel) s.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ? ch : '_');
  return s + ".csv";
}

}  // namespace

void write_windows(const std::filesystem::path& dir, const InstanceSet& x) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> header;
  for (Index t = 0; t < x.length(); ++t) header.push_back("t" + std::to_string(t));
  json index;
  index["channels"] = json::array();
  for (Index c = 0; c < x.channels(); ++c) {
    const auto& name = x.channel_names()[static_cast<std::size_t>(c)];
    const std::string file = file_name_for(name);
    csv::write_matrix(dir / file, header, x.channel(c));
    index["channels"].push_back({{"name", name}, {"file", file}});
  }
  index["instances"] = x.instances();
  index["length"] = x.length();
  index["origin_offsets"] = x.origin_offsets();
  save_json(dir / "index.json", index);
}

InstanceSet read_windows(const std::filesystem::path& dir) {
  std::vector<Matrix> channels;
  std::vector<std::string> names;
  std::vector<Index> offsets;
  if (std::filesystem::exists(dir / "index.json")) {
    const json index = load_json(dir / "index.json");
    for (const auto& ch : index.at("channels")) {
      names.push_back(ch.at("name").get<std::string>());
      channels.push_back(csv::read_matrix(dir / ch.at("file").get<std::string>()));
    }
    offsets = index.value("origin_offsets", std::vector<Index>{});
  } else {
    // bare directory of per-channel CSVs, sorted by file name
    if (!std::filesystem::is_directory(dir)) throw DataError("missing windows directory '" + dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      names.push_back(f.stem().string());
      channels.push_back(csv::read_matrix(f));
    }
  }
  if (channels.empty()) throw DataError("no channel CSVs in '" + dir.string() + "'");
  return InstanceSet(std::move(channels), std::move(names), std::move(offsets));
}

void write_plan(const std::filesystem::path& path, const SegmentationPlan& plan) {
  save_json(path, {{"length", plan.length},
                   {"instances", plan.instances},
                   {"period", plan.period ? json(*plan.period) : json(nullptr)},
                   {"raw_step", plan.raw_step},
                   {"step", plan.step},
                   {"offsets", plan.offsets}});
}

SegmentationPlan read_plan(const std::filesystem::path& path) {
  const json j = load_json(path);
  SegmentationPlan p;
  p.length = j.at("length").get<Index>();
  p.instances = j.at("instances").get<Index>();
  if (!j.at("period").is_null()) p.period = j.at("period").get<Index>();
  p.raw_step = j.at("raw_step").get<Index>();
  p.step = j.at("step").get<Index>();
  p.offsets = j.at("offsets").get<std::vector<Index>>();
  return p;
}

void write_scaler(const std::filesystem::path& path, const ScalerState& s) {
  json channels = json::array();
  for (std::size_t c = 0; c < s.mean.size(); ++c)
    channels.push_back({{"name", c < s.channel_names.size() ? s.channel_names[c] : ""},
                        {"mean", to_json(s.mean[c])},
                        {"std", to_json(s.std[c])}});
  save_json(path, {{"std_floor", ScalerState::kStdFloor}, {"channels", channels}});
}

ScalerState read_scaler(const std::filesystem::path& path) {
  const json j = load_json(path);
  ScalerState s;
  for (const auto& ch : j.at("channels")) {
    s.channel_names.push_back(ch.at("name").get<std::string>());
    s.mean.push_back(vector_from(ch.at("mean")));
    s.std.push_back(vector_from(ch.at("std")));
  }
  return s;
}

void write_basis(const std::filesystem::path& path, const BasisSystem& basis) {
  json channels = json::array();
  json diagnostics = json::array();
  for (const auto& ch : basis.channels) {
    channels.push_back({{"name", ch.name},
                        {"k", ch.k()},
                        {"mean_curve", to_json(ch.mean_curve)},
                        {"basis", to_json(ch.basis)},
                        {"eigenvalues", to_json(ch.eigenvalues)}});
    diagnostics.push_back(
        {{"name", ch.name}, {"iterations", ch.iterations}, {"converged", ch.converged}, {"warnings", ch.warnings}});
  }
  save_json(path, {{"method", to_string(basis.method)},
                   {"shared", basis.shared},
                   {"channels", channels},
                   {"diagnostics", diagnostics}});
}

BasisSystem read_basis(const std::filesystem::path& path) {
  const json j = load_json(path);
  BasisSystem b;
  b.method = parse_basis_method(j.at("method").get<std::string>());
  b.shared = j.value("shared", false);
  const json diagnostics = j.value("diagnostics", json::array());
  for (std::size_t c = 0; c < j.at("channels").size(); ++c) {
    const json& ch = j.at("channels")[c];
    ChannelBasis cb;
    cb.name = ch.at("name").get<std::string>();
    cb.mean_curve = vector_from(ch.at("mean_curve"));
    cb.basis = matrix_from(ch.at("basis"), cb.mean_curve.size());
    if (ch.contains("eigenvalues")) cb.eigenvalues = vector_from(ch.at("eigenvalues"));
    if (cb.k() != ch.at("k").get<Index>()) throw DataError("basis row count does not match k for '" + cb.name + "'");
    if (c < diagnostics.size()) {
      cb.iterations = diagnostics[c].value("iterations", 0);
      cb.converged = diagnostics[c].value("converged", true);
      cb.warnings = diagnostics[c].value("warnings", std::vector<std::string>{});
    }
    b.channels.push_back(std::move(cb));
  }
  return b;
}

std::filesystem::path sidecar_path(const std::filesystem::path& table_csv) {
  auto p = table_csv;
  p += ".json";
  return p;
}

void write_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::string> header;
  for (Index j = 0; j < table.cols(); ++j) header.push_back("value_" + std::to_string(j + 1));
  csv::write_matrix(path, header, table.values);
  json spans = json::array();
  for (const auto& s : table.spans) spans.push_back({{"name", s.name}, {"start", s.start}, {"width", s.width}});
  save_json(sidecar_path(path), {{"spans", spans}, {"row_ids", table.row_ids}});
}

EmbeddingTable read_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing artifact '" + path.string() + "'");
  EmbeddingTable t;
  t.values = csv::read_matrix(path);
  const json side = load_json(sidecar_path(path));
  for (const auto& s : side.at("spans"))
    t.spans.push_back({s.at("name").get<std::string>(), s.at("start").get<Index>(), s.at("width").get<Index>()});
  t.row_ids = side.value("row_ids", std::vector<Index>{});
  return t;
}

}  // namespace tsforge
