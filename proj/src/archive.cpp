#include "subcast/archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace subcast {

namespace {

using nlohmann::json;

void write_payload(const std::filesystem::path& path,
                   const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open payload for writing: " + path.string());
  static_assert(std::endian::native == std::endian::little,
                "payloads are little-endian; byte swap not implemented");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw ConfigError("short write on payload: " + path.string());
}

std::vector<float> read_payload(const std::filesystem::path& path,
                                std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ConfigError("cannot open payload: " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw ConfigError("payload size mismatch for " + path.string() + ": have " +
                      std::to_string(bytes) + " bytes, manifest expects " +
                      std::to_string(expected_count * sizeof(float)));
  }
  std::vector<float> data(expected_count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw ConfigError("short read on payload: " + path.string());
  return data;
}

}  // namespace

FieldArchive FieldArchive::create(Grid grid, std::vector<std::string> variables,
                                  TimeAxis times) {
  FieldArchive a;
  a.grid = std::move(grid);
  a.variables = std::move(variables);
  a.times = times;
  const std::size_t n =
      static_cast<std::size_t>(times.count) * a.grid.npoints();
  a.values.assign(a.variables.size(), std::vector<float>(n, 0.0f));
  a.masks.assign(a.variables.size(),
                 std::vector<std::uint8_t>(a.grid.npoints(), 0));
  a.validate();
  return a;
}

FieldArchive FieldArchive::create(Grid grid, std::vector<std::string> variables,
                                  const std::vector<std::int64_t>& timestamps) {
  if (timestamps.empty()) throw ConfigError("archive: empty time axis");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] != 1) {
      throw ConfigError("non-uniform 6-hour axis");
    }
  }
  TimeAxis axis{timestamps.front(),
                static_cast<std::int64_t>(timestamps.size())};
  return create(std::move(grid), std::move(variables), axis);
}

int FieldArchive::find_var(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int FieldArchive::var_index(const std::string& name) const {
  const int i = find_var(name);
  if (i < 0) throw ConfigError("archive has no variable '" + name + "'");
  return i;
}

void FieldArchive::refresh_masks() {
  const int np = grid.npoints();
  masks.assign(variables.size(), std::vector<std::uint8_t>(np, 0));
  for (std::size_t v = 0; v < variables.size(); ++v) {
    for (std::int64_t t = 0; t < times.count; ++t) {
      const float* f = field(static_cast<int>(v), t);
      for (int p = 0; p < np; ++p) {
        if (!std::isfinite(f[p])) masks[v][p] = 1;
      }
    }
  }
}

void FieldArchive::validate() const {
  grid.validate();
  if (times.count <= 0) throw ConfigError("archive: empty time axis");
  const std::size_t n =
      static_cast<std::size_t>(times.count) * grid.npoints();
  if (values.size() != variables.size()) {
    throw ConfigError("archive: variable/payload count mismatch");
  }
  for (const auto& v : values) {
    if (v.size() != n) throw ConfigError("archive: payload size mismatch");
  }
}

void write_archive(const FieldArchive& archive,
                   const std::filesystem::path& dir) {
  archive.validate();
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["variables"] = archive.variables;
  manifest["grid"] = {{"nlat", archive.grid.nlat},
                      {"nlon", archive.grid.nlon},
                      {"lat", archive.grid.lat},
                      {"lon", archive.grid.lon}};
  manifest["time"] = {{"start", archive.times.start},
                      {"step_hours", kStepHours},
                      {"count", archive.times.count}};
  manifest["element_type"] = "float32";
  manifest["byte_order"] = "little";
  json payloads = json::object();
  for (std::size_t v = 0; v < archive.variables.size(); ++v) {
    const std::string file = archive.variables[v] + ".f32";
    payloads[archive.variables[v]] = file;
    write_payload(dir / file, archive.values[v]);
  }
  manifest["payloads"] = payloads;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

FieldArchive load_archive(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ConfigError("bad manifest in " + dir.string() + ": " + e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != 1) {
    throw ConfigError("unknown archive format version in " + dir.string());
  }
  if (manifest["element_type"].get<std::string>() != "float32" ||
      manifest["byte_order"].get<std::string>() != "little") {
    throw ConfigError("unsupported element encoding in " + dir.string());
  }
  if (manifest["time"]["step_hours"].get<int>() != kStepHours) {
    throw ConfigError("non-uniform 6-hour axis: manifest declares " +
                      std::to_string(manifest["time"]["step_hours"].get<int>()) +
                      " h steps");
  }
  Grid grid = Grid::regular(manifest["grid"]["lat"].get<std::vector<double>>(),
                            manifest["grid"]["lon"].get<std::vector<double>>());
  if (grid.nlat != manifest["grid"]["nlat"].get<int>() ||
      grid.nlon != manifest["grid"]["nlon"].get<int>()) {
    throw ConfigError("grid dims inconsistent in manifest");
  }
  TimeAxis times{manifest["time"]["start"].get<std::int64_t>(),
                 manifest["time"]["count"].get<std::int64_t>()};
  auto variables = manifest["variables"].get<std::vector<std::string>>();
  FieldArchive a = FieldArchive::create(std::move(grid), variables, times);
  const std::size_t n =
      static_cast<std::size_t>(times.count) * a.grid.npoints();
  for (std::size_t v = 0; v < a.variables.size(); ++v) {
    const std::string file =
        manifest["payloads"].at(a.variables[v]).get<std::string>();
    a.values[v] = read_payload(dir / file, n);
  }
  a.refresh_masks();
  return a;
}

}  // namespace subcast
