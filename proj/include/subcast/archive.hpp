#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subcast/calendar.hpp"
#include "subcast/grid.hpp"

namespace subcast {

// Time-ordered gridded values for one or more variables; the common currency
// between the simulator, the surrogate and the verification engine.
// Values are float32, row-major [time][lat][lon] per variable. Masked points
// carry NaN in the payload; the per-variable spatial mask is derived on load.
struct FieldArchive {
  Grid grid;
  std::vector<std::string> variables;
  TimeAxis times;
  std::vector<std::vector<float>> values;        // [var][time*npoints]
  std::vector<std::vector<std::uint8_t>> masks;  // [var][npoints], 1 = masked

  static FieldArchive create(Grid grid, std::vector<std::string> variables,
                             TimeAxis times);
  // Validating constructor for an explicit timestamp list; rejects axes that
  // are not uniform 6-hour.
  static FieldArchive create(Grid grid, std::vector<std::string> variables,
                             const std::vector<std::int64_t>& timestamps);

  int var_index(const std::string& name) const;
  bool has_var(const std::string& name) const {
    return find_var(name) >= 0;
  }
  int find_var(const std::string& name) const;

  float* field(int v, std::int64_t t) {
    return values[v].data() + t * grid.npoints();
  }
  const float* field(int v, std::int64_t t) const {
    return values[v].data() + t * grid.npoints();
  }
  const std::uint8_t* mask(int v) const { return masks[v].data(); }

  // Recomputes per-variable masks from non-finite payload entries.
  void refresh_masks();
  void validate() const;
};

// Anomalies share the archive layout; the distinction is semantic.
using AnomalySeries = FieldArchive;

// Directory format: manifest.json (format_version 1) plus one raw
// little-endian float32 payload per variable. Round-trips are bit-exact.
void write_archive(const FieldArchive& archive,
                   const std::filesystem::path& dir);
FieldArchive load_archive(const std::filesystem::path& dir);

}  // namespace subcast
