#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "subcast/archive.hpp"
#include "subcast/climatology.hpp"

namespace subcast::metrics {

// Ordered initialization times; every init + lead must be resolvable in both
// the forecast and the observation series when pairing.
struct InitSet {
  std::vector<std::int64_t> inits;
};

// Lead window in 6-hour steps, inclusive on both ends. Week w covers days
// 7(w-1)+1 .. 7w, i.e. steps 28(w-1)+1 .. 28w; months are 30-day blocks.
struct LeadWindow {
  std::string label;
  int first_step = 1;
  int last_step = 28;
  bool sum = false;  // accumulate instead of averaging (precipitation)

  int length() const { return last_step - first_step + 1; }
  static LeadWindow week(int w, bool sum = false);
  static LeadWindow weeks(int w0, int w1, bool sum = false);  // biweekly etc.
  static LeadWindow month(int m, bool sum = false);
};

// Aggregates a per-lead sequence of fields over a window (mean or sum).
// fields[k] is the field at lead first_step + k.
void window_aggregate(const std::vector<const float*>& fields, int npoints,
                      bool sum, float* out);

// Temporal anomaly correlation per grid point across paired anomalies:
//   sum(f' o') / sqrt(sum(f'^2) sum(o'^2))
// Undefined points (either variance zero, or no valid pair) come back NaN.
std::vector<double> acc_temporal(const std::vector<const float*>& forecast,
                                 const std::vector<const float*>& observed,
                                 int npoints);

// Archive-level form: both series are indexed by valid time; pairs are taken
// at init + lead for every init.
std::vector<double> acc_temporal(const AnomalySeries& forecast,
                                 const AnomalySeries& observed, int var,
                                 const InitSet& inits, int lead);

// Cos-lat weighted mean of a TCC map over unmasked points of a region.
double acc_aggregate(const std::vector<double>& tcc_map, const Grid& grid,
                     const Region& region, double* retained_fraction = nullptr);

// Lat-weighted RMSE over points and pairs; masked/non-finite points skipped.
double rmse_weighted(const std::vector<const float*>& forecast,
                     const std::vector<const float*>& observed,
                     const Grid& grid, const Region& region);
double rmse_weighted(const FieldArchive& forecast, const FieldArchive& observed,
                     int var, const InitSet& inits, int lead,
                     const Region& region);

// Category probabilities for one forecast-observation pair at one point.
struct ProbForecast {
  std::vector<double> forecast_probs;  // P_f, length K
  std::vector<double> clim_probs;      // P_c, length K
  int observed_category = 0;           // index of the one-hot P_o
};

void validate_prob(const ProbForecast& pf);

// Ranked probability scores over cumulative distributions.
double rps(const ProbForecast& pf);       // forecast vs observed
double rps_clim(const ProbForecast& pf);  // climatology vs observed

// 1 - <RPS_f>/<RPS_c> over pairs; NaN when <RPS_c> vanishes.
double rpss(std::span<const ProbForecast> pairs);

// Brier skill for binary-event probability pairs (event = exceedance of the
// 90th climatological percentile in the verification pipeline).
struct BinaryPair {
  double event_prob = 0.0;  // forecast probability of the event
  bool occurred = false;
  double clim_prob = 0.0;
};
double bss(std::span<const BinaryPair> pairs);

// Member fraction per tercile category. Values exactly on a boundary count
// toward the lower category. K = 3; P_c = (1/3, 1/3, 1/3).
ProbForecast tercile_probs(std::span<const double> members, double q_lower,
                           double q_upper, double observed_value);
int tercile_category(double value, double q_lower, double q_upper);

// True where climatological biweekly cumulative precipitation is strictly
// below the threshold (default 1 mm / 2 weeks); such points are excluded
// from precipitation skill.
std::vector<std::uint8_t> dry_mask(const float* clim_biweekly_total,
                                   int npoints, double threshold_mm = 1.0);

// One verification result row; serialized as CSV with a fixed header.
struct SkillRow {
  std::string variable;
  std::string metric;         // ACC, RMSE, BSS, RPSS, ...
  std::string clim_kind;      // observed | model
  std::string lead_window;
  std::string region;
  double value = 0.0;
  std::int64_t n_pairs = 0;
  double retained_area_fraction = 1.0;
};

struct SkillReport {
  std::vector<SkillRow> rows;
};

void write_skill_csv(const SkillReport& report,
                     const std::filesystem::path& path);
SkillReport read_skill_csv(const std::filesystem::path& path);

// Exact shortest round-trip formatting used by every CSV writer, so repeated
// runs produce byte-identical files and readers recover the exact doubles.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace subcast::metrics
