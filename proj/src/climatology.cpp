#include "subcast/climatology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace subcast {

using nlohmann::json;

std::string to_string(ClimKind kind) {
  return kind == ClimKind::observed ? "observed" : "model";
}

ClimKind clim_kind_from_string(const std::string& s) {
  if (s == "observed") return ClimKind::observed;
  if (s == "model") return ClimKind::model;
  throw ConfigError("unknown climatology kind '" + s + "'");
}

Climatology::Climatology(ClimKind kind, Grid grid,
                         std::vector<std::string> variables,
                         std::vector<double> quantile_levels, int lead_count)
    : kind_(kind),
      grid_(std::move(grid)),
      variables_(std::move(variables)),
      quantile_levels_(std::move(quantile_levels)),
      lead_count_(lead_count) {
  if (kind_ == ClimKind::observed && lead_count_ != 0) {
    throw ConfigError("observed climatology must not carry a lead axis");
  }
  for (std::size_t q = 1; q < quantile_levels_.size(); ++q) {
    if (quantile_levels_[q] <= quantile_levels_[q - 1]) {
      throw ConfigError("quantile levels must be strictly increasing");
    }
  }
  blobs_.assign(variables_.size(), {});
}

int Climatology::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("climatology has no variable '" + name + "'");
}

bool Climatology::has_key(int calendar_key, int lead) const {
  return rows_.count(make_key(calendar_key, lead)) > 0;
}

std::size_t Climatology::row_of(std::int64_t key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) {
    throw ConfigError("calendar key " + std::to_string(key / 1024) + " lead " +
                      std::to_string(key % 1024) +
                      " not resolvable in climatology");
  }
  return it->second;
}

std::size_t Climatology::ensure_row(std::int64_t key) {
  auto it = rows_.find(key);
  if (it != rows_.end()) return it->second;
  const std::size_t row = key_order_.size();
  rows_.emplace(key, row);
  key_order_.push_back(key);
  for (auto& blob : blobs_) {
    blob.resize(blob.size() + fields_per_row(), 0.0f);
  }
  return row;
}

float* Climatology::mutable_mean(int var, int calendar_key, int lead) {
  const std::size_t row = ensure_row(make_key(calendar_key, lead));
  return blobs_[var].data() + row * fields_per_row();
}

float* Climatology::mutable_quantile(int var, int q, int calendar_key,
                                     int lead) {
  const std::size_t row = ensure_row(make_key(calendar_key, lead));
  return blobs_[var].data() + row * fields_per_row() +
         static_cast<std::size_t>(q + 1) * grid_.npoints();
}

const float* Climatology::mean_field(int var, int calendar_key,
                                     int lead) const {
  const std::size_t row = row_of(make_key(calendar_key, lead));
  return blobs_[var].data() + row * fields_per_row();
}

const float* Climatology::quantile_field(int var, int q, int calendar_key,
                                         int lead) const {
  if (q < 0 || q >= static_cast<int>(quantile_levels_.size())) {
    throw ConfigError("missing quantiles: climatology holds " +
                      std::to_string(quantile_levels_.size()) + " levels");
  }
  const std::size_t row = row_of(make_key(calendar_key, lead));
  return blobs_[var].data() + row * fields_per_row() +
         static_cast<std::size_t>(q + 1) * grid_.npoints();
}

void Climatology::set_sample_count(int calendar_key, int lead, int n) {
  counts_[make_key(calendar_key, lead)] = n;
}

int Climatology::sample_count(int calendar_key, int lead) const {
  auto it = counts_.find(make_key(calendar_key, lead));
  return it == counts_.end() ? 0 : it->second;
}

std::vector<std::int64_t> Climatology::keys() const { return key_order_; }

void Climatology::validate() const {
  grid_.validate();
  const int np = grid_.npoints();
  const int nq = static_cast<int>(quantile_levels_.size());
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    if (blobs_[v].size() != key_order_.size() * fields_per_row()) {
      throw ConfigError("climatology: blob size mismatch");
    }
    // Percentile fields must be monotone in the level at every point/key.
    for (std::size_t row = 0; row < key_order_.size(); ++row) {
      const float* base = blobs_[v].data() + row * fields_per_row();
      for (int q = 1; q < nq; ++q) {
        const float* lo = base + static_cast<std::size_t>(q) * np;
        const float* hi = base + static_cast<std::size_t>(q + 1) * np;
        for (int p = 0; p < np; ++p) {
          if (std::isfinite(lo[p]) && std::isfinite(hi[p]) && lo[p] > hi[p]) {
            throw NumericalError("climatology: quantiles not monotone");
          }
        }
      }
    }
  }
}

double quantile_type7(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw NumericalError("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

// Mean plus type-7 quantiles of one sample column; NaN fields when every
// sample is masked.
void column_stats(std::vector<double>& samples,
                  const std::vector<double>& levels, float* mean_out,
                  std::vector<float*>& quantile_out, int point) {
  if (samples.empty()) {
    mean_out[point] = std::numeric_limits<float>::quiet_NaN();
    for (auto* q : quantile_out) {
      q[point] = std::numeric_limits<float>::quiet_NaN();
    }
    return;
  }
  double sum = 0.0;
  for (double s : samples) sum += s;
  mean_out[point] = static_cast<float>(sum / static_cast<double>(samples.size()));
  if (!levels.empty()) {
    std::sort(samples.begin(), samples.end());
    for (std::size_t q = 0; q < levels.size(); ++q) {
      quantile_out[q][point] =
          static_cast<float>(quantile_type7(samples, levels[q]));
    }
  }
}

}  // namespace

Climatology compute_climatology(const FieldArchive& obs, int year_start,
                                int year_end, int doy_smoothing_halfwidth,
                                std::vector<double> quantile_levels) {
  obs.validate();
  if (year_end < year_start) throw ConfigError("empty climatology window");
  const std::int64_t want_start = to_step({year_start, 0, 0});
  const std::int64_t want_end = to_step({year_end + 1, 0, 0});
  if (want_start < obs.times.start || want_end > obs.times.end()) {
    throw ConfigError("climatology window not covered by archive");
  }
  if (doy_smoothing_halfwidth < 0 ||
      doy_smoothing_halfwidth > kDaysPerYear / 2) {
    throw ConfigError("bad day-of-year smoothing halfwidth");
  }

  Climatology clim(ClimKind::observed, obs.grid, obs.variables,
                   std::move(quantile_levels), 0);
  const int np = obs.grid.npoints();
  const int nyears = year_end - year_start + 1;
  const int nq = static_cast<int>(clim.quantile_levels().size());

  std::vector<std::int64_t> sample_times;
  std::vector<double> samples;
  for (int doy = 0; doy < kDaysPerYear; ++doy) {
    for (int hod = 0; hod < kStepsPerDay; ++hod) {
      sample_times.clear();
      for (int year = year_start; year <= year_end; ++year) {
        for (int off = -doy_smoothing_halfwidth;
             off <= doy_smoothing_halfwidth; ++off) {
          const int d = static_cast<int>(
              floor_mod(static_cast<std::int64_t>(doy) + off, kDaysPerYear));
          const std::int64_t t = to_step({year, d, hod});
          if (obs.times.contains(t)) sample_times.push_back(t);
        }
      }
      if (sample_times.size() < 2) {
        throw ConfigError("fewer than 2 samples for climatology key doy=" +
                          std::to_string(doy) + " hod=" + std::to_string(hod));
      }
      const int ck = doy * kStepsPerDay + hod;
      clim.set_sample_count(ck, 0, static_cast<int>(sample_times.size()));
      for (std::size_t v = 0; v < obs.variables.size(); ++v) {
        float* mean_out = clim.mutable_mean(static_cast<int>(v), ck);
        std::vector<float*> q_out(nq);
        for (int q = 0; q < nq; ++q) {
          q_out[q] = clim.mutable_quantile(static_cast<int>(v), q, ck);
        }
        for (int p = 0; p < np; ++p) {
          samples.clear();
          for (std::int64_t t : sample_times) {
            const float val = obs.field(static_cast<int>(v),
                                        obs.times.index_of(t))[p];
            if (std::isfinite(val)) samples.push_back(val);
          }
          column_stats(samples, clim.quantile_levels(), mean_out, q_out, p);
        }
      }
    }
  }
  (void)nyears;
  clim.validate();
  return clim;
}

Climatology compute_model_climatology(
    const std::vector<EnsembleHindcast>& hindcasts, int year_start,
    int year_end, std::vector<double> quantile_levels) {
  if (hindcasts.empty()) throw ConfigError("no hindcasts for model climatology");
  const Grid& grid = hindcasts.front().grid;
  const auto& variables = hindcasts.front().variables;
  const int n_leads = hindcasts.front().n_leads;
  for (const auto& h : hindcasts) {
    h.validate();
    if (!h.grid.same_as(grid) || h.variables != variables) {
      throw ConfigError("model climatology: inconsistent hindcast set");
    }
    if (h.n_leads != n_leads) {
      throw ConfigError("model climatology: missing lead coverage (hindcast "
                        "lead counts differ)");
    }
  }

  Climatology clim(ClimKind::model, grid, variables, std::move(quantile_levels),
                   n_leads + 1);
  const int np = grid.npoints();
  const int nq = static_cast<int>(clim.quantile_levels().size());

  // Group (hindcast, member) pairs by (valid calendar key, lead).
  struct Slot {
    std::vector<std::pair<const EnsembleHindcast*, int>> sources;  // (h, lead)
  };
  std::unordered_map<std::int64_t, Slot> slots;
  std::vector<std::int64_t> slot_order;
  for (const auto& h : hindcasts) {
    const int init_year = year_of(h.init_step);
    if (init_year < year_start || init_year > year_end) continue;
    for (int lead = 0; lead <= h.n_leads; ++lead) {
      const int ck = calendar_key(h.init_step + lead);
      const std::int64_t key = Climatology::make_key(ck, lead);
      auto [it, inserted] = slots.try_emplace(key);
      if (inserted) slot_order.push_back(key);
      it->second.sources.emplace_back(&h, lead);
    }
  }
  if (slots.empty()) {
    throw ConfigError("model climatology window matches no hindcast inits");
  }

  std::vector<double> samples;
  for (std::int64_t key : slot_order) {
    const Slot& slot = slots.at(key);
    const int ck = static_cast<int>(key / 1024);
    const int lead = static_cast<int>(key % 1024);
    int n_samples = 0;
    for (const auto& [h, l] : slot.sources) n_samples += h->n_members;
    clim.set_sample_count(ck, lead, n_samples);
    for (std::size_t v = 0; v < variables.size(); ++v) {
      float* mean_out = clim.mutable_mean(static_cast<int>(v), ck, lead);
      std::vector<float*> q_out(nq);
      for (int q = 0; q < nq; ++q) {
        q_out[q] = clim.mutable_quantile(static_cast<int>(v), q, ck, lead);
      }
      for (int p = 0; p < np; ++p) {
        samples.clear();
        for (const auto& [h, l] : slot.sources) {
          for (int m = 0; m < h->n_members; ++m) {
            const float val = h->field(m, static_cast<int>(v), l)[p];
            if (std::isfinite(val)) samples.push_back(val);
          }
        }
        column_stats(samples, clim.quantile_levels(), mean_out, q_out, p);
      }
    }
  }
  clim.validate();
  return clim;
}

AnomalySeries anomaly(const FieldArchive& data, const Climatology& clim) {
  if (clim.kind() == ClimKind::model) {
    throw ConfigError(
        "kind/axis mismatch: model climatology requires a lead axis, plain "
        "archives have none");
  }
  if (!data.grid.same_as(clim.grid())) {
    throw ConfigError("anomaly: grid mismatch");
  }
  AnomalySeries out = data;
  const int np = data.grid.npoints();
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    const int cv = clim.var_index(data.variables[v]);
    for (std::int64_t t = 0; t < data.times.count; ++t) {
      const int ck = calendar_key(data.times.at(t));
      const float* mean = clim.mean_field(cv, ck);
      float* f = out.field(static_cast<int>(v), t);
      for (int p = 0; p < np; ++p) f[p] -= mean[p];
    }
  }
  out.refresh_masks();
  return out;
}

EnsembleHindcast anomaly(const EnsembleHindcast& data,
                         const Climatology& clim) {
  if (!data.grid.same_as(clim.grid())) {
    throw ConfigError("anomaly: grid mismatch");
  }
  EnsembleHindcast out = data;
  const int np = data.grid.npoints();
  for (std::size_t v = 0; v < data.variables.size(); ++v) {
    const int cv = clim.var_index(data.variables[v]);
    for (int lead = 0; lead <= data.n_leads; ++lead) {
      const int ck = calendar_key(data.init_step + lead);
      const int lead_key = clim.kind() == ClimKind::model ? lead : 0;
      const float* mean = clim.mean_field(cv, ck, lead_key);
      for (int m = 0; m < data.n_members; ++m) {
        float* f = out.field(m, static_cast<int>(v), lead);
        for (int p = 0; p < np; ++p) f[p] -= mean[p];
      }
    }
  }
  return out;
}

void write_climatology(const Climatology& clim,
                       const std::filesystem::path& dir) {
  clim.validate();
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = to_string(clim.kind());
  manifest["variables"] = clim.variables();
  manifest["quantile_levels"] = clim.quantile_levels();
  manifest["lead_count"] = clim.lead_count();
  manifest["grid"] = {{"lat", clim.grid().lat}, {"lon", clim.grid().lon}};
  manifest["keys"] = clim.keys();
  json counts = json::array();
  for (std::int64_t key : clim.keys()) {
    counts.push_back(clim.sample_count(static_cast<int>(key / 1024),
                                       static_cast<int>(key % 1024)));
  }
  manifest["sample_counts"] = counts;
  std::ofstream out(dir / "climatology.json");
  if (!out) throw ConfigError("cannot write climatology manifest");
  out << manifest.dump(2) << "\n";

  const int np = clim.grid().npoints();
  const int nq = static_cast<int>(clim.quantile_levels().size());
  for (std::size_t v = 0; v < clim.variables().size(); ++v) {
    std::ofstream payload(dir / (clim.variables()[v] + ".f32"),
                          std::ios::binary);
    if (!payload) throw ConfigError("cannot write climatology payload");
    for (std::int64_t key : clim.keys()) {
      const int ck = static_cast<int>(key / 1024);
      const int lead = static_cast<int>(key % 1024);
      payload.write(reinterpret_cast<const char*>(
                        clim.mean_field(static_cast<int>(v), ck, lead)),
                    np * sizeof(float));
      for (int q = 0; q < nq; ++q) {
        payload.write(
            reinterpret_cast<const char*>(
                clim.quantile_field(static_cast<int>(v), q, ck, lead)),
            np * sizeof(float));
      }
    }
  }
}

Climatology load_climatology(const std::filesystem::path& dir) {
  std::ifstream in(dir / "climatology.json");
  if (!in) throw ConfigError("no climatology.json in " + dir.string());
  json manifest;
  in >> manifest;
  if (manifest["format_version"].get<int>() != 1) {
    throw ConfigError("unknown climatology format version");
  }
  Grid grid = Grid::regular(manifest["grid"]["lat"].get<std::vector<double>>(),
                            manifest["grid"]["lon"].get<std::vector<double>>());
  Climatology clim(clim_kind_from_string(manifest["kind"].get<std::string>()),
                   grid, manifest["variables"].get<std::vector<std::string>>(),
                   manifest["quantile_levels"].get<std::vector<double>>(),
                   manifest["lead_count"].get<int>());
  const auto keys = manifest["keys"].get<std::vector<std::int64_t>>();
  const auto counts = manifest["sample_counts"].get<std::vector<int>>();
  const int np = grid.npoints();
  const int nq = static_cast<int>(clim.quantile_levels().size());
  for (std::size_t v = 0; v < clim.variables().size(); ++v) {
    std::ifstream payload(dir / (clim.variables()[v] + ".f32"),
                          std::ios::binary);
    if (!payload) throw ConfigError("missing climatology payload");
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const int ck = static_cast<int>(keys[k] / 1024);
      const int lead = static_cast<int>(keys[k] % 1024);
      payload.read(reinterpret_cast<char*>(
                       clim.mutable_mean(static_cast<int>(v), ck, lead)),
                   np * sizeof(float));
      for (int q = 0; q < nq; ++q) {
        payload.read(
            reinterpret_cast<char*>(
                clim.mutable_quantile(static_cast<int>(v), q, ck, lead)),
            np * sizeof(float));
      }
      if (!payload) throw ConfigError("climatology payload size mismatch");
      if (v == 0) {
        clim.set_sample_count(ck, lead, counts.at(k));
      }
    }
  }
  clim.validate();
  return clim;
}

}  // namespace subcast
