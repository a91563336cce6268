#include "subcast/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace subcast::verify {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Accumulated sums and maps for one (window, kind).
struct WindowKindResult {
  std::vector<double> tcc_map, bss_map, rpss_map;
  std::vector<double> fo, ff, oo;  // ACC pieces, ens-mean anomalies
  std::vector<double> se;          // squared error for RMSE
  std::vector<double> rps_f, rps_c, bs_f, bs_c;
  std::vector<std::uint8_t> excluded;  // dry points
  int n_pairs = 0;
};

void compute_window_kind(const VerifyCase& vc, int w, int kind_idx,
                         double q90_clim_prob, WindowKindResult& r) {
  const int np = vc.grid.npoints();
  const auto& ref = vc.refs[kind_idx];
  r.fo.assign(np, 0.0);
  r.ff.assign(np, 0.0);
  r.oo.assign(np, 0.0);
  r.se.assign(np, 0.0);
  r.rps_f.assign(np, 0.0);
  r.rps_c.assign(np, 0.0);
  r.bs_f.assign(np, 0.0);
  r.bs_c.assign(np, 0.0);
  r.excluded.assign(np, 0);
  r.n_pairs = vc.n_inits;

  if (vc.precip_like && !vc.dry.empty()) {
    // Exclude a point when it is dry at every init of this window.
    for (int p = 0; p < np; ++p) {
      bool all_dry = true;
      for (int i = 0; i < vc.n_inits && all_dry; ++i) {
        all_dry = vc.dry[vc.wi(w, i) + p] != 0;
      }
      r.excluded[p] = all_dry ? 1 : 0;
    }
  }

  for (int i = 0; i < vc.n_inits; ++i) {
    const float* obs = vc.obs_window.data() + vc.wi(w, i);
    const float* obs_mean = vc.obs_clim_mean.data() + vc.wi(w, i);
    const float* fc_mean_ref = ref.fc_clim_mean.data() + vc.wi(w, i);
    const float* fq33 = ref.q33.data() + vc.wi(w, i);
    const float* fq66 = ref.q66.data() + vc.wi(w, i);
    const float* fq90 = ref.q90.data() + vc.wi(w, i);
    const float* oq33 = vc.obs_q33.data() + vc.wi(w, i);
    const float* oq66 = vc.obs_q66.data() + vc.wi(w, i);
    const float* oq90 = vc.obs_q90.data() + vc.wi(w, i);
    const std::uint8_t* dry =
        (vc.precip_like && !vc.dry.empty()) ? vc.dry.data() + vc.wi(w, i)
                                            : nullptr;

    int n_valid = 0;
    for (int m = 0; m < vc.n_members; ++m) {
      if (vc.member_valid[static_cast<std::size_t>(i) * vc.n_members + m]) {
        ++n_valid;
      }
    }
    if (n_valid == 0) continue;

    for (int p = 0; p < np; ++p) {
      if (r.excluded[p]) continue;
      if (dry != nullptr && dry[p]) continue;
      const double o_raw = obs[p];
      if (!std::isfinite(o_raw)) continue;
      const double o_anom = o_raw - obs_mean[p];

      double ens_sum = 0.0;
      int below = 0, middle = 0, exceed = 0;
      for (int m = 0; m < vc.n_members; ++m) {
        if (!vc.member_valid[static_cast<std::size_t>(i) * vc.n_members + m]) {
          continue;
        }
        const double f = vc.fc_window[vc.wim(w, i, m) + p];
        ens_sum += f;
        // Boundary ties go to the lower category.
        if (f <= fq33[p]) {
          ++below;
        } else if (f <= fq66[p]) {
          ++middle;
        }
        if (f > fq90[p]) ++exceed;
      }
      const double ens_mean = ens_sum / n_valid;
      const double f_anom =
          vc.climatological_probs ? 0.0 : ens_mean - fc_mean_ref[p];

      r.fo[p] += f_anom * o_anom;
      r.ff[p] += f_anom * f_anom;
      r.oo[p] += o_anom * o_anom;
      r.se[p] += (f_anom - o_anom) * (f_anom - o_anom);

      // Tercile RPS: the forecast is binned against the kind's boundaries,
      // the outcome against the observed boundaries.
      const double pf0 = vc.climatological_probs
                             ? 1.0 / 3.0
                             : static_cast<double>(below) / n_valid;
      const double pf1 = vc.climatological_probs
                             ? 1.0 / 3.0
                             : static_cast<double>(middle) / n_valid;
      const int obs_cat = metrics::tercile_category(o_raw, oq33[p], oq66[p]);
      const double cf1 = pf0;
      const double cf2 = pf0 + pf1;
      const double co1 = obs_cat == 0 ? 1.0 : 0.0;
      const double co2 = obs_cat <= 1 ? 1.0 : 0.0;
      r.rps_f[p] += (cf1 - co1) * (cf1 - co1) + (cf2 - co2) * (cf2 - co2);
      const double cc1 = 1.0 / 3.0 - co1;
      const double cc2 = 2.0 / 3.0 - co2;
      r.rps_c[p] += cc1 * cc1 + cc2 * cc2;

      // Binary 90th-percentile exceedance.
      const double p_event = vc.climatological_probs
                                 ? q90_clim_prob
                                 : static_cast<double>(exceed) / n_valid;
      const double occurred = o_raw > oq90[p] ? 1.0 : 0.0;
      r.bs_f[p] += (p_event - occurred) * (p_event - occurred);
      r.bs_c[p] += (q90_clim_prob - occurred) * (q90_clim_prob - occurred);
    }
  }

  r.tcc_map.assign(np, kNaN);
  r.bss_map.assign(np, kNaN);
  r.rpss_map.assign(np, kNaN);
  for (int p = 0; p < np; ++p) {
    if (r.excluded[p]) continue;
    if (r.ff[p] > 0.0 && r.oo[p] > 0.0) {
      r.tcc_map[p] = r.fo[p] / std::sqrt(r.ff[p] * r.oo[p]);
    }
    if (r.rps_c[p] > 0.0) r.rpss_map[p] = 1.0 - r.rps_f[p] / r.rps_c[p];
    if (r.bs_c[p] > 0.0) r.bss_map[p] = 1.0 - r.bs_f[p] / r.bs_c[p];
  }
}

struct Task {
  const VerifyCase* vc = nullptr;
  int w = 0;
  int kind_idx = 0;
  WindowKindResult result;
};

void run_tasks(std::vector<Task>& tasks, int threads, double q90_clim_prob) {
  const int n_workers = std::max(1, threads);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) break;
      Task& t = tasks[k];
      compute_window_kind(*t.vc, t.w, t.kind_idx, q90_clim_prob, t.result);
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int k = 0; k < n_workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
}

double aggregate_skill_sums(const Grid& grid, const std::vector<double>& num,
                            const std::vector<double>& den,
                            const std::vector<std::uint8_t>& excluded,
                            const Region& region, double* retained) {
  double num_acc = 0.0, den_acc = 0.0, wsum = 0.0, wregion = 0.0;
  bool any = false;
  for (int i = 0; i < grid.nlat; ++i) {
    for (int j = 0; j < grid.nlon; ++j) {
      if (!region.contains(grid.lat[i], grid.lon[j])) continue;
      any = true;
      const double w = grid.weights[i];
      wregion += w;
      const int p = grid.point(i, j);
      if (excluded[p]) continue;
      num_acc += w * num[p];
      den_acc += w * den[p];
      wsum += w;
    }
  }
  if (!any) throw ConfigError("region '" + region.name + "' misses the grid");
  if (retained != nullptr) *retained = wregion > 0.0 ? wsum / wregion : 0.0;
  if (den_acc <= 0.0) return kNaN;
  return 1.0 - num_acc / den_acc;
}

double spatial_acc_mean(const VerifyCase& vc, int w, int kind_idx,
                        const Region& region) {
  const auto& ref = vc.refs[kind_idx];
  double total = 0.0;
  int used = 0;
  for (int i = 0; i < vc.n_inits; ++i) {
    int n_valid = 0;
    for (int m = 0; m < vc.n_members; ++m) {
      if (vc.member_valid[static_cast<std::size_t>(i) * vc.n_members + m]) {
        ++n_valid;
      }
    }
    if (n_valid == 0) continue;
    double fo = 0.0, ff = 0.0, oo = 0.0;
    for (int lat = 0; lat < vc.grid.nlat; ++lat) {
      for (int lon = 0; lon < vc.grid.nlon; ++lon) {
        if (!region.contains(vc.grid.lat[lat], vc.grid.lon[lon])) continue;
        const int p = vc.grid.point(lat, lon);
        const double wgt = vc.grid.weights[lat];
        double ens = 0.0;
        for (int m = 0; m < vc.n_members; ++m) {
          if (!vc.member_valid[static_cast<std::size_t>(i) * vc.n_members +
                               m]) {
            continue;
          }
          ens += vc.fc_window[vc.wim(w, i, m) + p];
        }
        ens /= n_valid;
        const double f = ens - ref.fc_clim_mean[vc.wi(w, i) + p];
        const double o = vc.obs_window[vc.wi(w, i) + p] -
                         vc.obs_clim_mean[vc.wi(w, i) + p];
        fo += wgt * f * o;
        ff += wgt * f * f;
        oo += wgt * o * o;
      }
    }
    if (ff > 0.0 && oo > 0.0) {
      total += fo / std::sqrt(ff * oo);
      ++used;
    }
  }
  return used > 0 ? total / used : kNaN;
}

void emit_case_rows(const VerifyCase& vc, const std::vector<Task>& tasks,
                    const VerifyOptions& options, CaseResult& out) {
  for (const auto& t : tasks) {
    const auto& r = t.result;
    const std::string kind = to_string(vc.refs[t.kind_idx].kind);
    const std::string window = vc.windows[t.w].label;
    for (const auto& region : options.regions) {
      double retained = 1.0;
      metrics::SkillRow row;
      row.variable = vc.variable;
      row.clim_kind = kind;
      row.lead_window = window;
      row.region = region.name;
      row.n_pairs = r.n_pairs;

      row.metric = "ACC";
      try {
        row.value = area_mean(vc.grid, r.tcc_map.data(), region,
                              r.excluded.data(), &retained);
      } catch (const NumericalError&) {
        row.value = kNaN;
        retained = 0.0;
      }
      row.retained_area_fraction = retained;
      out.rows.push_back(row);

      if (options.rmse_rows) {
        std::vector<double> rmse_map(vc.grid.npoints(), kNaN);
        for (int p = 0; p < vc.grid.npoints(); ++p) {
          if (!r.excluded[p]) {
            rmse_map[p] = std::sqrt(r.se[p] / std::max(1, r.n_pairs));
          }
        }
        row.metric = "RMSE";
        try {
          row.value = area_mean(vc.grid, rmse_map.data(), region,
                                r.excluded.data(), &retained);
        } catch (const NumericalError&) {
          row.value = kNaN;
          retained = 0.0;
        }
        row.retained_area_fraction = retained;
        out.rows.push_back(row);
      }

      row.metric = "RPSS";
      row.value = aggregate_skill_sums(vc.grid, r.rps_f, r.rps_c, r.excluded,
                                       region, &retained);
      row.retained_area_fraction = retained;
      out.rows.push_back(row);

      row.metric = "BSS";
      row.value = aggregate_skill_sums(vc.grid, r.bs_f, r.bs_c, r.excluded,
                                       region, &retained);
      row.retained_area_fraction = retained;
      out.rows.push_back(row);

      if (options.spatial_acc_rows) {
        row.metric = "ACC_spatial";
        row.value = spatial_acc_mean(vc, t.w, t.kind_idx, region);
        row.retained_area_fraction = 1.0;
        out.rows.push_back(row);
      }
    }
    if (options.emit_maps) {
      out.maps.push_back({"TCC", kind, window, t.result.tcc_map});
      out.maps.push_back({"BSS", kind, window, t.result.bss_map});
      out.maps.push_back({"RPSS", kind, window, t.result.rpss_map});
    }
  }
}

}  // namespace

void VerifyCase::allocate() {
  const int np = grid.npoints();
  const std::size_t wi_n =
      static_cast<std::size_t>(windows.size()) * n_inits * np;
  obs_window.assign(wi_n, 0.0f);
  obs_clim_mean.assign(wi_n, 0.0f);
  obs_q33.assign(wi_n, 0.0f);
  obs_q66.assign(wi_n, 0.0f);
  obs_q90.assign(wi_n, 0.0f);
  fc_window.assign(wi_n * n_members, 0.0f);
  member_valid.assign(static_cast<std::size_t>(n_inits) * n_members, 1);
  for (auto& ref : refs) {
    ref.fc_clim_mean.assign(wi_n, 0.0f);
    ref.q33.assign(wi_n, 0.0f);
    ref.q66.assign(wi_n, 0.0f);
    ref.q90.assign(wi_n, 0.0f);
  }
  if (precip_like) dry.assign(wi_n, 0);
}

void VerifyCase::validate() const {
  grid.validate();
  if (windows.empty() || n_inits < 2 || n_members < 1) {
    throw ConfigError("verify case: need windows, >= 2 inits and >= 1 member");
  }
  if (refs.empty()) throw ConfigError("verify case: no climatology reference");
  const std::size_t wi_n =
      static_cast<std::size_t>(windows.size()) * n_inits * grid.npoints();
  if (obs_window.size() != wi_n || obs_clim_mean.size() != wi_n ||
      obs_q33.size() != wi_n || obs_q66.size() != wi_n ||
      obs_q90.size() != wi_n || fc_window.size() != wi_n * n_members) {
    throw ConfigError("verify case: array shape mismatch");
  }
  for (const auto& ref : refs) {
    if (ref.fc_clim_mean.size() != wi_n || ref.q33.size() != wi_n ||
        ref.q66.size() != wi_n || ref.q90.size() != wi_n) {
      throw ConfigError("verify case: reference shape mismatch");
    }
  }
}

CaseResult verify_case(const VerifyCase& vc, const VerifyOptions& options) {
  vc.validate();
  std::vector<Task> tasks;
  for (std::size_t w = 0; w < vc.windows.size(); ++w) {
    for (std::size_t k = 0; k < vc.refs.size(); ++k) {
      tasks.push_back(
          Task{&vc, static_cast<int>(w), static_cast<int>(k), {}});
    }
  }
  run_tasks(tasks, options.threads, options.q90_clim_prob);
  CaseResult out;
  emit_case_rows(vc, tasks, options, out);
  return out;
}

CaseResult verify_cases(const std::vector<VerifyCase>& cases,
                        const VerifyOptions& options) {
  std::vector<Task> tasks;
  std::vector<std::size_t> case_task_count;
  for (const auto& vc : cases) {
    vc.validate();
    std::size_t n = 0;
    for (std::size_t w = 0; w < vc.windows.size(); ++w) {
      for (std::size_t k = 0; k < vc.refs.size(); ++k) {
        tasks.push_back(
            Task{&vc, static_cast<int>(w), static_cast<int>(k), {}});
        ++n;
      }
    }
    case_task_count.push_back(n);
  }
  run_tasks(tasks, options.threads, options.q90_clim_prob);

  CaseResult out;
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const std::vector<Task> case_tasks(
        std::make_move_iterator(tasks.begin() + cursor),
        std::make_move_iterator(tasks.begin() + cursor + case_task_count[c]));
    cursor += case_task_count[c];
    emit_case_rows(cases[c], case_tasks, options, out);
  }
  return out;
}

}  // namespace subcast::verify
