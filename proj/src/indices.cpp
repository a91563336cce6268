#include "subcast/indices.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "subcast/metrics.hpp"

namespace subcast::indices {

using nlohmann::json;

AnomalySeries intraseasonal_filter(const AnomalySeries& series) {
  const int history = kIntraseasonalDays * kStepsPerDay;
  if (series.times.count <= history) {
    throw ConfigError("intraseasonal_filter: need more than " +
                      std::to_string(kIntraseasonalDays) + " days of history");
  }
  const int np = series.grid.npoints();
  const std::int64_t out_count = series.times.count - history;
  AnomalySeries out = AnomalySeries::create(
      series.grid, series.variables,
      TimeAxis{series.times.start + history, out_count});

  for (std::size_t v = 0; v < series.variables.size(); ++v) {
    // Running sum over the previous `history` steps, per point.
    std::vector<double> running(np, 0.0);
    for (std::int64_t t = 0; t < history; ++t) {
      const float* f = series.field(static_cast<int>(v), t);
      for (int p = 0; p < np; ++p) running[p] += f[p];
    }
    for (std::int64_t t = 0; t < out_count; ++t) {
      const float* current = series.field(static_cast<int>(v), history + t);
      float* o = out.field(static_cast<int>(v), t);
      for (int p = 0; p < np; ++p) {
        o[p] = static_cast<float>(current[p] -
                                  running[p] / static_cast<double>(history));
      }
      // Slide the window: drop t, add history + t.
      const float* drop = series.field(static_cast<int>(v), t);
      for (int p = 0; p < np; ++p) {
        running[p] += current[p] - drop[p];
      }
    }
  }
  out.refresh_masks();
  return out;
}

std::vector<double> meridional_mean(const AnomalySeries& series, int var,
                                    double band_south, double band_north) {
  const Grid& g = series.grid;
  std::vector<int> rows;
  double wsum = 0.0;
  std::vector<double> w;
  for (int i = 0; i < g.nlat; ++i) {
    if (g.lat[i] >= band_south && g.lat[i] <= band_north) {
      rows.push_back(i);
      w.push_back(g.weights[i]);
      wsum += g.weights[i];
    }
  }
  if (rows.empty()) {
    throw ConfigError("latitude band [" + std::to_string(band_south) + ", " +
                      std::to_string(band_north) + "] absent from grid");
  }
  std::vector<double> out(static_cast<std::size_t>(series.times.count) *
                          g.nlon);
  for (std::int64_t t = 0; t < series.times.count; ++t) {
    const float* f = series.field(var, t);
    for (int j = 0; j < g.nlon; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        acc += w[r] * f[g.point(rows[r], j)];
      }
      out[t * g.nlon + j] = acc / wsum;
    }
  }
  return out;
}

HovmollerDiagram hovmoller(const AnomalySeries& series, int var,
                           double band_south, double band_north) {
  HovmollerDiagram d;
  d.lons = series.grid.lon;
  d.times.resize(series.times.count);
  for (std::int64_t t = 0; t < series.times.count; ++t) {
    d.times[t] = series.times.at(t);
  }
  d.values = meridional_mean(series, var, band_south, band_north);
  double ss = 0.0;
  for (double v : d.values) ss += v * v;
  const double sd = std::sqrt(ss / static_cast<double>(d.values.size()));
  d.normalization = sd > 0.0 ? sd : 1.0;
  for (double& v : d.values) v /= d.normalization;
  return d;
}

namespace {

// Longitude-mean variance of a [time][lon] matrix.
double field_variance(const std::vector<double>& field, int ntime, int nlon) {
  double ss = 0.0;
  for (double v : field) ss += v * v;
  return ss / static_cast<double>(ntime * nlon);
}

void check_rmm_axes(const std::vector<double>& a, const std::vector<double>& b,
                    const std::vector<double>& c, int ntime, int nlon) {
  const auto n = static_cast<std::size_t>(ntime) * nlon;
  if (a.size() != n || b.size() != n || c.size() != n) {
    throw ConfigError("rmm: fields do not share the (time, longitude) axes");
  }
}

}  // namespace

RmmBasis rmm_basis(const std::vector<double>& field_a,
                   const std::vector<double>& field_b,
                   const std::vector<double>& field_c, int ntime, int nlon) {
  check_rmm_axes(field_a, field_b, field_c, ntime, nlon);
  RmmBasis basis;
  basis.nlon = nlon;
  const std::vector<double>* fields[3] = {&field_a, &field_b, &field_c};
  for (int f = 0; f < 3; ++f) {
    const double var = field_variance(*fields[f], ntime, nlon);
    basis.field_norm[f] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  std::vector<double> combined(static_cast<std::size_t>(ntime) * 3 * nlon);
  for (int t = 0; t < ntime; ++t) {
    for (int f = 0; f < 3; ++f) {
      for (int j = 0; j < nlon; ++j) {
        combined[t * 3 * nlon + f * nlon + j] =
            (*fields[f])[t * nlon + j] / basis.field_norm[f];
      }
    }
  }
  const std::vector<double> unit_weights(3 * nlon, 1.0);
  basis.eof = eof_pair(combined, ntime, 3 * nlon, unit_weights);

  // Basis-period PC standard deviations for the final standardization.
  std::vector<double> snapshot(3 * nlon);
  double ss1 = 0.0, ss2 = 0.0;
  for (int t = 0; t < ntime; ++t) {
    std::copy(combined.begin() + t * 3 * nlon,
              combined.begin() + (t + 1) * 3 * nlon, snapshot.begin());
    const double pc1 = basis.eof.project(snapshot, 1);
    const double pc2 = basis.eof.project(snapshot, 2);
    ss1 += pc1 * pc1;
    ss2 += pc2 * pc2;
  }
  basis.pc_std[0] = ss1 > 0.0 ? std::sqrt(ss1 / ntime) : 1.0;
  basis.pc_std[1] = ss2 > 0.0 ? std::sqrt(ss2 / ntime) : 1.0;
  return basis;
}

RmmIndex rmm_project(const std::vector<double>& field_a,
                     const std::vector<double>& field_b,
                     const std::vector<double>& field_c, int ntime,
                     const std::vector<std::int64_t>& times,
                     const RmmBasis& basis) {
  check_rmm_axes(field_a, field_b, field_c, ntime, basis.nlon);
  if (static_cast<int>(times.size()) != ntime) {
    throw ConfigError("rmm_project: time axis mismatch");
  }
  const int nlon = basis.nlon;
  RmmIndex idx;
  idx.times = times;
  idx.rmm1.resize(ntime);
  idx.rmm2.resize(ntime);
  idx.amplitude.resize(ntime);
  idx.phase.resize(ntime);
  const std::vector<double>* fields[3] = {&field_a, &field_b, &field_c};
  std::vector<double> snapshot(3 * nlon);
  for (int t = 0; t < ntime; ++t) {
    for (int f = 0; f < 3; ++f) {
      for (int j = 0; j < nlon; ++j) {
        snapshot[f * nlon + j] = (*fields[f])[t * nlon + j] / basis.field_norm[f];
      }
    }
    idx.rmm1[t] = basis.eof.project(snapshot, 1) / basis.pc_std[0];
    idx.rmm2[t] = basis.eof.project(snapshot, 2) / basis.pc_std[1];
    idx.phase[t] = rmm_phase(idx.rmm1[t], idx.rmm2[t], &idx.amplitude[t]);
  }
  return idx;
}

int rmm_phase(double rmm1, double rmm2, double* amplitude) {
  const double amp = std::sqrt(rmm1 * rmm1 + rmm2 * rmm2);
  if (amplitude != nullptr) *amplitude = amp;
  if (amp == 0.0) return 0;
  double theta = std::atan2(rmm2, rmm1) * 180.0 / 3.14159265358979323846;
  if (theta < 0.0) theta += 360.0;
  // Octants: 5..8 over [0,180), 1..4 over [180,360), half-open.
  const int octant = std::min(static_cast<int>(theta / 45.0), 7);
  static constexpr int kPhase[8] = {5, 6, 7, 8, 1, 2, 3, 4};
  return kPhase[octant];
}

double bivariate_skill(const std::vector<double>& f1,
                       const std::vector<double>& f2,
                       const std::vector<double>& o1,
                       const std::vector<double>& o2) {
  const std::size_t n = f1.size();
  if (n == 0 || f2.size() != n || o1.size() != n || o2.size() != n) {
    throw ConfigError("bivariate_skill: empty or unpaired index series");
  }
  double num = 0.0, ff = 0.0, oo = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    num += f1[t] * o1[t] + f2[t] * o2[t];
    ff += f1[t] * f1[t] + f2[t] * f2[t];
    oo += o1[t] * o1[t] + o2[t] * o2[t];
  }
  if (ff <= 0.0 || oo <= 0.0) {
    throw NumericalError("bivariate_skill: zero-variance index");
  }
  return num / std::sqrt(ff * oo);
}

NaoBasis nao_basis(const AnomalySeries& z500, int var, const Region& region) {
  const Grid& g = z500.grid;
  NaoBasis basis;
  basis.region = region;
  std::vector<double> weights;
  for (int i = 0; i < g.nlat; ++i) {
    for (int j = 0; j < g.nlon; ++j) {
      if (region.contains(g.lat[i], g.lon[j])) {
        basis.region_points.push_back(g.point(i, j));
        weights.push_back(g.weights[i]);
      }
    }
  }
  if (basis.region_points.size() < 2) {
    throw ConfigError("nao_basis: region '" + region.name +
                      "' absent from grid");
  }
  const int ns = static_cast<int>(basis.region_points.size());
  const auto nt = static_cast<int>(z500.times.count);
  std::vector<double> data(static_cast<std::size_t>(nt) * ns);
  for (int t = 0; t < nt; ++t) {
    const float* f = z500.field(var, t);
    for (int s = 0; s < ns; ++s) {
      data[static_cast<std::size_t>(t) * ns + s] = f[basis.region_points[s]];
    }
  }
  basis.eof = eof_pair(data, nt, ns, weights);

  // Positive index <=> below-normal heights at the high-latitude center:
  // flip so the mean loading over the upper third of the sector is negative.
  const double lat_hi = region.lat_max - (region.lat_max - region.lat_min) / 3.0;
  double loading = 0.0, wsum = 0.0;
  const auto physical = basis.eof.physical_pattern(1);
  for (int s = 0; s < ns; ++s) {
    const int p = basis.region_points[s];
    const double lat = g.lat[p / g.nlon];
    if (lat >= lat_hi) {
      loading += weights[s] * physical[s];
      wsum += weights[s];
    }
  }
  if (wsum > 0.0 && loading / wsum > 0.0) {
    for (double& x : basis.eof.pattern1) x = -x;
  }

  // Standardization constants over the basis (climatology) period.
  std::vector<double> scaled(ns);
  double sum = 0.0, ss = 0.0;
  for (int t = 0; t < nt; ++t) {
    const float* f = z500.field(var, t);
    for (int s = 0; s < ns; ++s) {
      scaled[s] = f[basis.region_points[s]] * basis.eof.weights_sqrt[s];
    }
    const double pc = basis.eof.project(scaled, 1);
    sum += pc;
    ss += pc * pc;
  }
  basis.pc_mean = sum / nt;
  const double var_pc = ss / nt - basis.pc_mean * basis.pc_mean;
  basis.pc_std = var_pc > 0.0 ? std::sqrt(var_pc) : 1.0;
  return basis;
}

PatternIndex nao_index(const AnomalySeries& z500, int var,
                       const NaoBasis& basis) {
  const int ns = static_cast<int>(basis.region_points.size());
  PatternIndex idx;
  idx.name = "NAO";
  idx.times.resize(z500.times.count);
  idx.values.resize(z500.times.count);
  std::vector<double> scaled(ns);
  for (std::int64_t t = 0; t < z500.times.count; ++t) {
    idx.times[t] = z500.times.at(t);
    const float* f = z500.field(var, t);
    for (int s = 0; s < ns; ++s) {
      scaled[s] = f[basis.region_points[s]] * basis.eof.weights_sqrt[s];
    }
    idx.values[t] = (basis.eof.project(scaled, 1) - basis.pc_mean) / basis.pc_std;
  }
  return idx;
}

PatternIndex point_pattern_index(const AnomalySeries& standardized, int var,
                                 const TelePattern& pattern,
                                 bool standardize_output) {
  const Grid& g = standardized.grid;
  std::vector<int> points;
  for (const auto& c : pattern.centers) {
    if (c.lat < g.lat.front() - 10.0 || c.lat > g.lat.back() + 10.0) {
      throw ConfigError("teleconnection center outside grid: " + pattern.name);
    }
    points.push_back(g.nearest(c.lat, c.lon));
  }
  PatternIndex idx;
  idx.name = pattern.name;
  idx.times.resize(standardized.times.count);
  idx.values.resize(standardized.times.count);
  for (std::int64_t t = 0; t < standardized.times.count; ++t) {
    idx.times[t] = standardized.times.at(t);
    const float* f = standardized.field(var, t);
    double acc = 0.0;
    for (std::size_t c = 0; c < pattern.centers.size(); ++c) {
      acc += pattern.centers[c].coefficient * pattern.centers[c].sign *
             f[points[c]];
    }
    idx.values[t] = acc;
  }
  if (standardize_output && !idx.values.empty()) {
    double sum = 0.0, ss = 0.0;
    for (double v : idx.values) {
      sum += v;
      ss += v * v;
    }
    const double mean = sum / static_cast<double>(idx.values.size());
    const double sd =
        std::sqrt(std::max(ss / static_cast<double>(idx.values.size()) -
                               mean * mean,
                           0.0));
    if (sd > 0.0) {
      for (double& v : idx.values) v = (v - mean) / sd;
    }
  }
  return idx;
}

std::vector<TelePattern> builtin_center_table() {
  // Pointwise center definitions; the PJ row is a configurable two-center
  // summer dipole rather than an established formula.
  std::vector<TelePattern> table;
  table.push_back({"PNA",
                   {{20.0, 200.0, +1.0, 0.25},
                    {45.0, 195.0, -1.0, 0.25},
                    {55.0, 245.0, +1.0, 0.25},
                    {30.0, 275.0, -1.0, 0.25}}});
  table.push_back({"EA",
                   {{55.0, 340.0, +1.0, 0.5},
                    {25.0, 335.0, -1.0, 0.25},
                    {50.0, 40.0, -1.0, 0.25}}});
  table.push_back({"WP",
                   {{60.0, 155.0, +1.0, 0.5}, {30.0, 155.0, -1.0, 0.5}}});
  table.push_back({"EU",
                   {{55.0, 20.0, -1.0, 0.25},
                    {55.0, 75.0, +1.0, 0.5},
                    {40.0, 145.0, -1.0, 0.25}}});
  table.push_back({"PJ",
                   {{45.0, 165.0, +1.0, 0.5}, {25.0, 125.0, -1.0, 0.5}}});
  return table;
}

std::vector<TelePattern> load_center_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read center table " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("bad center table: " + std::string(e.what()));
  }
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1) {
    throw ConfigError("unknown center table schema version");
  }
  std::vector<TelePattern> table;
  for (const auto& pat : doc["patterns"]) {
    TelePattern tp;
    tp.name = pat["name"].get<std::string>();
    for (const auto& row : pat["centers"]) {
      tp.centers.push_back({row["lat"].get<double>(), row["lon"].get<double>(),
                            row["sign"].get<double>(),
                            row["coefficient"].get<double>()});
    }
    table.push_back(std::move(tp));
  }
  return table;
}

void write_center_table(const std::vector<TelePattern>& table,
                        const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = 1;
  json patterns = json::array();
  for (const auto& tp : table) {
    json centers = json::array();
    for (const auto& c : tp.centers) {
      centers.push_back({{"lat", c.lat},
                         {"lon", c.lon},
                         {"sign", c.sign},
                         {"coefficient", c.coefficient}});
    }
    patterns.push_back({{"name", tp.name}, {"centers", centers}});
  }
  doc["patterns"] = patterns;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write center table " + path.string());
  out << doc.dump(2) << "\n";
}

void write_index_csv(const PatternIndex& index,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "time,value\n";
  for (std::size_t t = 0; t < index.times.size(); ++t) {
    out << index.times[t] << ',' << metrics::format_double(index.values[t])
        << "\n";
  }
}

void write_rmm_csv(const RmmIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "time,rmm1,rmm2,amplitude,phase\n";
  for (std::size_t t = 0; t < index.times.size(); ++t) {
    out << index.times[t] << ',' << metrics::format_double(index.rmm1[t]) << ','
        << metrics::format_double(index.rmm2[t]) << ','
        << metrics::format_double(index.amplitude[t]) << ',' << index.phase[t]
        << "\n";
  }
}

}  // namespace subcast::indices
