#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "subcast/archive.hpp"
#include "subcast/hindcast.hpp"

namespace subcast {

enum class ClimKind { observed, model };

std::string to_string(ClimKind kind);
ClimKind clim_kind_from_string(const std::string& s);

// Calendar-keyed mean and percentile fields. Observed climatologies are keyed
// by (day-of-year, hour-of-day); model climatologies additionally carry a
// lead-step axis and are keyed by the valid-time calendar key plus lead.
// Storage is sparse in the key so hindcast-derived climatologies only hold
// the keys their init schedule covers.
class Climatology {
 public:
  Climatology() = default;
  Climatology(ClimKind kind, Grid grid, std::vector<std::string> variables,
              std::vector<double> quantile_levels, int lead_count);

  ClimKind kind() const { return kind_; }
  const Grid& grid() const { return grid_; }
  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<double>& quantile_levels() const {
    return quantile_levels_;
  }
  int lead_count() const { return lead_count_; }
  int var_index(const std::string& name) const;

  // Key construction. Observed keys ignore lead (pass 0).
  static std::int64_t make_key(int calendar_key, int lead) {
    return static_cast<std::int64_t>(calendar_key) * 1024 + lead;
  }
  bool has_key(int calendar_key, int lead = 0) const;

  // Allocates (or finds) the row for a key and returns mutable field pointers.
  float* mutable_mean(int var, int calendar_key, int lead = 0);
  float* mutable_quantile(int var, int q, int calendar_key, int lead = 0);

  const float* mean_field(int var, int calendar_key, int lead = 0) const;
  const float* quantile_field(int var, int q, int calendar_key,
                              int lead = 0) const;
  void set_sample_count(int calendar_key, int lead, int n);
  int sample_count(int calendar_key, int lead = 0) const;

  std::vector<std::int64_t> keys() const;
  void validate() const;

 private:
  std::size_t row_of(std::int64_t key) const;
  std::size_t ensure_row(std::int64_t key);
  std::size_t fields_per_row() const {
    return (1 + quantile_levels_.size()) * grid_.npoints();
  }

  ClimKind kind_ = ClimKind::observed;
  Grid grid_;
  std::vector<std::string> variables_;
  std::vector<double> quantile_levels_;
  int lead_count_ = 0;
  std::unordered_map<std::int64_t, std::size_t> rows_;
  std::vector<std::int64_t> key_order_;
  std::unordered_map<std::int64_t, int> counts_;
  // blobs_[var]: per row, mean field then one field per quantile level.
  std::vector<std::vector<float>> blobs_;
};

// Type-7 quantile (linear interpolation between order statistics) of an
// already sorted sample vector.
double quantile_type7(const std::vector<double>& sorted, double level);

// Per (day-of-year, hour) mean and quantiles over all window years and the
// +-halfwidth-day calendar neighbourhood. Requires the archive to cover every
// year of the window in full and at least two samples per key.
Climatology compute_climatology(const FieldArchive& obs, int year_start,
                                int year_end, int doy_smoothing_halfwidth,
                                std::vector<double> quantile_levels = {
                                    1.0 / 3.0, 2.0 / 3.0, 0.9});

// Per (valid calendar key, lead step) ensemble-and-year statistics of a
// hindcast sweep. Quantile levels may be empty for a mean-only climatology.
Climatology compute_model_climatology(
    const std::vector<EnsembleHindcast>& hindcasts, int year_start,
    int year_end, std::vector<double> quantile_levels = {});

// Observation anomalies: value minus the matching observed climatological
// mean. Model climatologies are rejected (they require a lead axis).
AnomalySeries anomaly(const FieldArchive& data, const Climatology& clim);

// Hindcast anomalies under either climatology kind; the result reuses the
// hindcast layout with values replaced by deviations.
EnsembleHindcast anomaly(const EnsembleHindcast& data, const Climatology& clim);

void write_climatology(const Climatology& clim,
                       const std::filesystem::path& dir);
Climatology load_climatology(const std::filesystem::path& dir);

}  // namespace subcast
