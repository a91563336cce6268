#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subcast/archive.hpp"
#include "subcast/eof.hpp"

namespace subcast::indices {

// Anomalies minus the mean of the previous 120 days, per point. The output
// starts 120 days into the input; shorter inputs are rejected.
inline constexpr int kIntraseasonalDays = 120;
AnomalySeries intraseasonal_filter(const AnomalySeries& series);

// Time x longitude matrix of a field averaged (cos-weighted) over a latitude
// band, normalized by the record standard deviation.
struct HovmollerDiagram {
  std::vector<std::int64_t> times;
  std::vector<double> lons;
  std::vector<double> values;  // [time][lon]
  double normalization = 1.0;

  double at(std::size_t t, std::size_t j) const {
    return values[t * lons.size() + j];
  }
};
HovmollerDiagram hovmoller(const AnomalySeries& series, int var,
                           double band_south = -15.0, double band_north = 15.0);

// Meridional-mean [time][lon] matrix over the band, without normalization;
// the building block shared by the RMM pipeline and the Hovmoller diagram.
std::vector<double> meridional_mean(const AnomalySeries& series, int var,
                                    double band_south, double band_north);

// Combined-EOF basis for an RMM-style index: three meridional-mean fields,
// each normalized by the square root of its longitude-mean variance over the
// basis period, concatenated along longitude.
struct RmmBasis {
  EofBasis eof;
  int nlon = 0;
  double field_norm[3] = {1.0, 1.0, 1.0};  // per-field variance normalizers
  double pc_std[2] = {1.0, 1.0};           // basis-period PC standard deviations
};

RmmBasis rmm_basis(const std::vector<double>& field_a,
                   const std::vector<double>& field_b,
                   const std::vector<double>& field_c, int ntime, int nlon);

// Standardized two-component index with amplitude and phase per step.
// Phase 0 is the zero-amplitude sentinel.
struct RmmIndex {
  std::vector<std::int64_t> times;
  std::vector<double> rmm1, rmm2, amplitude;
  std::vector<int> phase;
};

RmmIndex rmm_project(const std::vector<double>& field_a,
                     const std::vector<double>& field_b,
                     const std::vector<double>& field_c, int ntime,
                     const std::vector<std::int64_t>& times,
                     const RmmBasis& basis);

// Octant phase: theta = atan2(rmm2, rmm1) in [0, 360); phases 5..8 cover
// [0,45)..[135,180) and 1..4 cover [180,225)..[315,360). Returns 0 when the
// amplitude is zero.
int rmm_phase(double rmm1, double rmm2, double* amplitude = nullptr);

// Bivariate correlation between paired two-component indices:
//   sum(a1 b1 + a2 b2) / sqrt(sum(a1^2 + a2^2) sum(b1^2 + b2^2))
double bivariate_skill(const std::vector<double>& f1,
                       const std::vector<double>& f2,
                       const std::vector<double>& o1,
                       const std::vector<double>& o2);

// Standardized scalar index series.
struct PatternIndex {
  std::string name;
  std::vector<std::int64_t> times;
  std::vector<double> values;
};

// Leading-EOF NAO-style index of height anomalies over a sector. The sign is
// fixed so a positive index corresponds to below-normal heights at the
// high-latitude center (upper third of the sector).
struct NaoBasis {
  EofBasis eof;
  Region region;
  std::vector<int> region_points;  // grid point ids inside the region
  double pc_std = 1.0;
  double pc_mean = 0.0;
};
NaoBasis nao_basis(const AnomalySeries& z500, int var,
                   const Region& region = Region::box("nao_sector", 20.0, 80.0,
                                                      270.0, 40.0));
PatternIndex nao_index(const AnomalySeries& z500, int var,
                       const NaoBasis& basis);

// Signed point combination of standardized anomalies at fixed centers,
// standardized over the series.
struct TeleCenter {
  double lat = 0.0;
  double lon = 0.0;
  double sign = 1.0;
  double coefficient = 1.0;
};
struct TelePattern {
  std::string name;
  std::vector<TeleCenter> centers;
};

PatternIndex point_pattern_index(const AnomalySeries& standardized, int var,
                                 const TelePattern& pattern,
                                 bool standardize_output = true);

// Center tables: built-in defaults and the versioned JSON data file format.
std::vector<TelePattern> builtin_center_table();
std::vector<TelePattern> load_center_table(const std::filesystem::path& path);
void write_center_table(const std::vector<TelePattern>& table,
                        const std::filesystem::path& path);

// CSV export shared by the index subcommands:
// time,value for scalar indices; time,rmm1,rmm2,amplitude,phase for RMM.
void write_index_csv(const PatternIndex& index,
                     const std::filesystem::path& path);
void write_rmm_csv(const RmmIndex& index, const std::filesystem::path& path);

}  // namespace subcast::indices
