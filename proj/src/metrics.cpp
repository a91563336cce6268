#include "subcast/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace subcast::metrics {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

LeadWindow LeadWindow::week(int w, bool sum) {
  if (w < 1) throw ConfigError("week index must be >= 1");
  return LeadWindow{"week" + std::to_string(w), 28 * (w - 1) + 1, 28 * w, sum};
}

LeadWindow LeadWindow::weeks(int w0, int w1, bool sum) {
  if (w0 < 1 || w1 < w0) throw ConfigError("bad week range");
  return LeadWindow{"week" + std::to_string(w0) + "-" + std::to_string(w1),
                    28 * (w0 - 1) + 1, 28 * w1, sum};
}

LeadWindow LeadWindow::month(int m, bool sum) {
  if (m < 1) throw ConfigError("month index must be >= 1");
  return LeadWindow{"month" + std::to_string(m), 120 * (m - 1) + 1, 120 * m,
                    sum};
}

void window_aggregate(const std::vector<const float*>& fields, int npoints,
                      bool sum, float* out) {
  if (fields.empty()) throw ConfigError("window_aggregate: empty window");
  for (int p = 0; p < npoints; ++p) {
    double acc = 0.0;
    for (const float* f : fields) acc += f[p];
    if (!sum) acc /= static_cast<double>(fields.size());
    out[p] = static_cast<float>(acc);
  }
}

std::vector<double> acc_temporal(const std::vector<const float*>& forecast,
                                 const std::vector<const float*>& observed,
                                 int npoints) {
  if (forecast.size() != observed.size()) {
    throw ConfigError("acc_temporal: unpaired inputs");
  }
  if (forecast.size() < 2) {
    throw ConfigError("acc_temporal: need at least 2 init times");
  }
  std::vector<double> tcc(npoints, kNaN);
  for (int p = 0; p < npoints; ++p) {
    double fo = 0.0, ff = 0.0, oo = 0.0;
    bool valid = true;
    for (std::size_t k = 0; k < forecast.size(); ++k) {
      const double f = forecast[k][p];
      const double o = observed[k][p];
      if (!std::isfinite(f) || !std::isfinite(o)) {
        valid = false;
        break;
      }
      fo += f * o;
      ff += f * f;
      oo += o * o;
    }
    if (valid && ff > 0.0 && oo > 0.0) {
      tcc[p] = fo / std::sqrt(ff * oo);
    }
  }
  return tcc;
}

std::vector<double> acc_temporal(const AnomalySeries& forecast,
                                 const AnomalySeries& observed, int var,
                                 const InitSet& inits, int lead) {
  if (!forecast.grid.same_as(observed.grid)) {
    throw ConfigError("acc_temporal: mismatched grids");
  }
  if (inits.inits.empty()) throw ConfigError("acc_temporal: empty init set");
  std::vector<const float*> f, o;
  f.reserve(inits.inits.size());
  o.reserve(inits.inits.size());
  for (std::int64_t t0 : inits.inits) {
    const std::int64_t valid = t0 + lead;
    f.push_back(forecast.field(var, forecast.times.index_of(valid)));
    o.push_back(observed.field(var, observed.times.index_of(valid)));
  }
  return acc_temporal(f, o, forecast.grid.npoints());
}

double acc_aggregate(const std::vector<double>& tcc_map, const Grid& grid,
                     const Region& region, double* retained_fraction) {
  if (static_cast<int>(tcc_map.size()) != grid.npoints()) {
    throw ConfigError("acc_aggregate: map/grid size mismatch");
  }
  return area_mean(grid, tcc_map.data(), region, nullptr, retained_fraction);
}

double rmse_weighted(const std::vector<const float*>& forecast,
                     const std::vector<const float*>& observed,
                     const Grid& grid, const Region& region) {
  if (forecast.size() != observed.size() || forecast.empty()) {
    throw ConfigError("rmse_weighted: unpaired or empty inputs");
  }
  grid.validate();
  double acc = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k < forecast.size(); ++k) {
    for (int i = 0; i < grid.nlat; ++i) {
      const double w = grid.weights[i];
      for (int j = 0; j < grid.nlon; ++j) {
        if (!region.contains(grid.lat[i], grid.lon[j])) continue;
        const int p = grid.point(i, j);
        const double f = forecast[k][p];
        const double o = observed[k][p];
        if (!std::isfinite(f) || !std::isfinite(o)) continue;
        const double d = f - o;
        acc += w * d * d;
        wsum += w;
      }
    }
  }
  if (wsum <= 0.0) throw NumericalError("rmse_weighted: no valid points");
  return std::sqrt(acc / wsum);
}

double rmse_weighted(const FieldArchive& forecast, const FieldArchive& observed,
                     int var, const InitSet& inits, int lead,
                     const Region& region) {
  if (!forecast.grid.same_as(observed.grid)) {
    throw ConfigError("rmse_weighted: grid mismatch");
  }
  std::vector<const float*> f, o;
  for (std::int64_t t0 : inits.inits) {
    const std::int64_t valid = t0 + lead;
    f.push_back(forecast.field(var, forecast.times.index_of(valid)));
    o.push_back(observed.field(var, observed.times.index_of(valid)));
  }
  return rmse_weighted(f, o, forecast.grid, region);
}

void validate_prob(const ProbForecast& pf) {
  const std::size_t k = pf.forecast_probs.size();
  if (k < 2 || pf.clim_probs.size() != k) {
    throw ConfigError("probability vectors need matching K >= 2");
  }
  if (pf.observed_category < 0 || pf.observed_category >= static_cast<int>(k)) {
    throw ConfigError("observed category out of range");
  }
  double sf = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (pf.forecast_probs[i] < 0.0 || pf.clim_probs[i] < 0.0) {
      throw ConfigError("negative category probability");
    }
    sf += pf.forecast_probs[i];
    sc += pf.clim_probs[i];
  }
  if (std::abs(sf - 1.0) > 1e-6 || std::abs(sc - 1.0) > 1e-6) {
    throw ConfigError("category probabilities must sum to 1");
  }
}

namespace {
double rps_impl(const std::vector<double>& probs, int observed_category) {
  double cum_p = 0.0, cum_o = 0.0, score = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    cum_p += probs[k];
    cum_o += (static_cast<int>(k) == observed_category) ? 1.0 : 0.0;
    const double d = cum_p - cum_o;
    score += d * d;
  }
  return score;
}
}  // namespace

double rps(const ProbForecast& pf) {
  return rps_impl(pf.forecast_probs, pf.observed_category);
}

double rps_clim(const ProbForecast& pf) {
  return rps_impl(pf.clim_probs, pf.observed_category);
}

double rpss(std::span<const ProbForecast> pairs) {
  if (pairs.empty()) throw ConfigError("rpss: no forecast-observation pairs");
  double sum_f = 0.0, sum_c = 0.0;
  for (const auto& pf : pairs) {
    sum_f += rps(pf);
    sum_c += rps_clim(pf);
  }
  if (sum_c <= 0.0) return kNaN;
  return 1.0 - sum_f / sum_c;
}

double bss(std::span<const BinaryPair> pairs) {
  if (pairs.empty()) throw ConfigError("bss: no pairs");
  double bs_f = 0.0, bs_c = 0.0;
  for (const auto& pr : pairs) {
    const double o = pr.occurred ? 1.0 : 0.0;
    bs_f += (pr.event_prob - o) * (pr.event_prob - o);
    bs_c += (pr.clim_prob - o) * (pr.clim_prob - o);
  }
  if (bs_c <= 0.0) return kNaN;
  return 1.0 - bs_f / bs_c;
}

int tercile_category(double value, double q_lower, double q_upper) {
  // Boundary ties go to the lower category.
  if (value <= q_lower) return 0;
  if (value <= q_upper) return 1;
  return 2;
}

ProbForecast tercile_probs(std::span<const double> members, double q_lower,
                           double q_upper, double observed_value) {
  if (members.empty()) throw ConfigError("tercile_probs: empty ensemble");
  if (!std::isfinite(q_lower) || !std::isfinite(q_upper)) {
    throw ConfigError("tercile_probs: missing quantiles");
  }
  ProbForecast pf;
  pf.forecast_probs.assign(3, 0.0);
  pf.clim_probs.assign(3, 1.0 / 3.0);
  for (double m : members) {
    pf.forecast_probs[tercile_category(m, q_lower, q_upper)] += 1.0;
  }
  for (double& p : pf.forecast_probs) {
    p /= static_cast<double>(members.size());
  }
  pf.observed_category = tercile_category(observed_value, q_lower, q_upper);
  return pf;
}

std::vector<std::uint8_t> dry_mask(const float* clim_biweekly_total,
                                   int npoints, double threshold_mm) {
  std::vector<std::uint8_t> mask(npoints, 0);
  for (int p = 0; p < npoints; ++p) {
    const double total = clim_biweekly_total[p];
    // Strictly "less than": exactly 1 mm / 2 weeks stays in.
    if (!std::isfinite(total) || total < threshold_mm) mask[p] = 1;
  }
  return mask;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  // Round-trip double formatting; %.17g is exact for IEEE binary64.
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (end != nullptr && *end != '\0')) {
    throw ConfigError("bad numeric field '" + s + "'");
  }
  return v;
}

namespace {
const char* kSkillHeader =
    "variable,metric,climatology_kind,lead_window,region,value,n_pairs,"
    "retained_area_fraction";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

void write_skill_csv(const SkillReport& report,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << kSkillHeader << "\n";
  for (const auto& row : report.rows) {
    out << row.variable << ',' << row.metric << ',' << row.clim_kind << ','
        << row.lead_window << ',' << row.region << ','
        << format_double(row.value) << ',' << row.n_pairs << ','
        << format_double(row.retained_area_fraction) << "\n";
  }
}

SkillReport read_skill_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSkillHeader) {
    throw ConfigError("bad skill CSV header in " + path.string());
  }
  SkillReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 8) {
      throw ConfigError("bad skill CSV row in " + path.string());
    }
    SkillRow row;
    row.variable = fields[0];
    row.metric = fields[1];
    row.clim_kind = fields[2];
    row.lead_window = fields[3];
    row.region = fields[4];
    row.value = parse_double(fields[5]);
    row.n_pairs = std::stoll(fields[6]);
    row.retained_area_fraction = parse_double(fields[7]);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace subcast::metrics
