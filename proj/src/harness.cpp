#include "subcast/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include "json.hpp"
#include "subcast/svg.hpp"

namespace subcast::harness {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_precip(const std::string& variable) { return variable == "precipa"; }

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int k = 0; k < n_workers; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Windowed aggregate of an archive variable starting at `start`.
void window_values(const FieldArchive& a, int var, std::int64_t start,
                   const metrics::LeadWindow& win, float* out) {
  std::vector<const float*> fields;
  fields.reserve(win.length());
  for (int k = win.first_step; k <= win.last_step; ++k) {
    fields.push_back(a.field(var, a.times.index_of(start + k)));
  }
  metrics::window_aggregate(fields, a.grid.npoints(), win.sum, out);
}

// Windowed aggregate of hindcast member leads.
void window_member(const EnsembleHindcast& h, int member, int var,
                   const metrics::LeadWindow& win, float* out) {
  if (win.last_step > h.n_leads) {
    throw ConfigError("lead window " + win.label + " exceeds hindcast leads");
  }
  std::vector<const float*> fields;
  fields.reserve(win.length());
  for (int k = win.first_step; k <= win.last_step; ++k) {
    fields.push_back(h.field(member, var, k));
  }
  metrics::window_aggregate(fields, h.grid.npoints(), win.sum, out);
}

// Windowed aggregate of climatological mean fields along the valid times.
void window_clim_mean(const Climatology& clim, int var, std::int64_t init_step,
                      const metrics::LeadWindow& win, float* out) {
  const int np = clim.grid().npoints();
  std::vector<double> acc(np, 0.0);
  for (int k = win.first_step; k <= win.last_step; ++k) {
    const int ck = calendar_key(init_step + k);
    const int lead = clim.kind() == ClimKind::model ? k : 0;
    const float* mean = clim.mean_field(var, ck, lead);
    for (int p = 0; p < np; ++p) acc[p] += mean[p];
  }
  const double scale = win.sum ? 1.0 : 1.0 / win.length();
  for (int p = 0; p < np; ++p) out[p] = static_cast<float>(acc[p] * scale);
}

void stats_from_samples(std::vector<std::vector<float>>& samples, int npoints,
                        WindowStats& out) {
  const auto n = samples.size();
  if (n < 2) {
    throw ConfigError("windowed climatology: fewer than 2 samples");
  }
  out.mean.resize(npoints);
  out.q33.resize(npoints);
  out.q66.resize(npoints);
  out.q90.resize(npoints);
  std::vector<double> column(n);
  for (int p = 0; p < npoints; ++p) {
    for (std::size_t s = 0; s < n; ++s) column[s] = samples[s][p];
    double sum = 0.0;
    for (double v : column) sum += v;
    out.mean[p] = static_cast<float>(sum / static_cast<double>(n));
    std::sort(column.begin(), column.end());
    out.q33[p] = static_cast<float>(quantile_type7(column, 1.0 / 3.0));
    out.q66[p] = static_cast<float>(quantile_type7(column, 2.0 / 3.0));
    out.q90[p] = static_cast<float>(quantile_type7(column, 0.9));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  toy.validate();
  if (truth_years < 2) throw ConfigError("config: need at least 2 truth years");
  if (train_year_start > train_year_end || test_year_start > test_year_end) {
    throw ConfigError("config: empty year split");
  }
  if (train_year_end >= test_year_start) {
    throw ConfigError("config: train and test periods must be disjoint");
  }
  if (test_year_end >= truth_years) {
    throw ConfigError("config: test period exceeds truth archive");
  }
  if (init_stride_days < 1 || sweep_stride_days < 1) {
    throw ConfigError("config: init stride must be >= 1 day");
  }
  if (members < 1 || sweep_members < 1) {
    throw ConfigError("config: member counts must be >= 1");
  }
  if (lead_steps < 28) throw ConfigError("config: lead_steps < one week");
  if (clim_halfwidth_days < 0) throw ConfigError("config: bad halfwidth");
  if (verify_variables.empty()) throw ConfigError("config: nothing to verify");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.toy.forcing.assign(cfg.toy.rings, 8.0);
  cfg.train.train_year_start = cfg.train_year_start;
  cfg.train.train_year_end = cfg.train_year_end;
  cfg.perturbation.mode = ens::PerturbMode::both;
  cfg.regions = {Region::global(),
                 Region::box("tropics", -20.0, 20.0, 0.0, 360.0),
                 Region::box("north", 20.0, 90.0, 0.0, 360.0),
                 Region::box("south", -90.0, -20.0, 0.0, 360.0)};
  return cfg;
}

namespace {

void load_toy(const json& j, toy::ToyParams& p) {
  if (j.contains("sites")) p.sites = j["sites"].get<int>();
  if (j.contains("fast_per_site")) p.fast_per_site = j["fast_per_site"].get<int>();
  if (j.contains("rings")) p.rings = j["rings"].get<int>();
  if (j.contains("forcing")) {
    if (j["forcing"].is_number()) {
      p.forcing.assign(p.rings, j["forcing"].get<double>());
    } else {
      p.forcing = j["forcing"].get<std::vector<double>>();
    }
  }
  if (j.contains("coupling_h")) p.coupling_h = j["coupling_h"].get<double>();
  if (j.contains("space_scale_b")) p.space_scale_b = j["space_scale_b"].get<double>();
  if (j.contains("time_scale_c")) p.time_scale_c = j["time_scale_c"].get<double>();
  if (j.contains("tau_ocean_days")) p.tau_ocean_days = j["tau_ocean_days"].get<double>();
  if (j.contains("tau_land_days")) p.tau_land_days = j["tau_land_days"].get<double>();
  if (j.contains("ocean_gain")) p.ocean_gain = j["ocean_gain"].get<double>();
  if (j.contains("precip_threshold")) p.precip_threshold = j["precip_threshold"].get<double>();
  if (j.contains("dt")) p.dt = j["dt"].get<double>();
  if (j.contains("units_per_6h")) p.units_per_6h = j["units_per_6h"].get<double>();
  if (j.contains("seasonal_amplitude")) p.seasonal_amplitude = j["seasonal_amplitude"].get<double>();
  if (j.contains("ring_lats")) p.ring_lats = j["ring_lats"].get<std::vector<double>>();
  if (p.forcing.empty()) p.forcing.assign(p.rings, 8.0);
}

void load_perturbation(const json& j, ens::PerturbationConfig& p) {
  if (j.contains("mode")) {
    p.mode = ens::perturb_mode_from_string(j["mode"].get<std::string>());
  }
  if (j.contains("ic")) {
    const json& ic = j["ic"];
    if (ic.contains("amplitude")) p.ic.amplitude = ic["amplitude"].get<double>();
    if (ic.contains("octaves")) p.ic.octaves = ic["octaves"].get<int>();
    if (ic.contains("base_wavelength")) p.ic.base_wavelength = ic["base_wavelength"].get<double>();
    if (ic.contains("persistence")) p.ic.persistence = ic["persistence"].get<double>();
    if (ic.contains("seed")) p.ic.seed = ic["seed"].get<std::uint64_t>();
    if (ic.contains("mask")) {
      const auto mask = ic["mask"].get<std::vector<int>>();
      p.ic.mask.assign(mask.begin(), mask.end());
    }
  }
  if (j.contains("model")) {
    const json& mp = j["model"];
    if (mp.contains("seed_base")) p.model.seed_base = mp["seed_base"].get<std::uint64_t>();
    if (mp.contains("switch_mask")) {
      const auto mask = mp["switch_mask"].get<std::vector<int>>();
      p.model.switch_mask.assign(mask.begin(), mask.end());
    }
  }
  if (j.contains("include_control_in_mean")) {
    p.include_control_in_mean = j["include_control_in_mean"].get<bool>();
  }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad config JSON: " + std::string(e.what()));
  }
  ExperimentConfig cfg = default_config();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("toy")) load_toy(j["toy"], cfg.toy);
  if (j.contains("truth")) {
    if (j["truth"].contains("years")) cfg.truth_years = j["truth"]["years"].get<int>();
    if (j["truth"].contains("spinup_years")) cfg.spinup_years = j["truth"]["spinup_years"].get<int>();
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    if (s.contains("train_year_start")) cfg.train_year_start = s["train_year_start"].get<int>();
    if (s.contains("train_year_end")) cfg.train_year_end = s["train_year_end"].get<int>();
    if (s.contains("test_year_start")) cfg.test_year_start = s["test_year_start"].get<int>();
    if (s.contains("test_year_end")) cfg.test_year_end = s["test_year_end"].get<int>();
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (t.contains("stage1_epochs")) cfg.train.stage1_epochs = t["stage1_epochs"].get<int>();
    if (t.contains("stage2_epochs")) cfg.train.stage2_epochs = t["stage2_epochs"].get<int>();
    if (t.contains("learning_rate")) cfg.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("beta1")) cfg.train.beta1 = t["beta1"].get<double>();
    if (t.contains("beta2")) cfg.train.beta2 = t["beta2"].get<double>();
    if (t.contains("kl_weight")) cfg.train.kl_weight = t["kl_weight"].get<double>();
    if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"].get<double>();
    if (t.contains("input_noise")) cfg.train.input_noise = t["input_noise"].get<double>();
    if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
    if (t.contains("mode")) cfg.train.mode = model::mode_from_string(t["mode"].get<std::string>());
    if (t.contains("mse_loss")) cfg.train.mse_loss = t["mse_loss"].get<bool>();
    if (t.contains("residual_output")) cfg.train.residual_output = t["residual_output"].get<bool>();
    if (t.contains("widths")) {
      if (t["widths"].contains("encoder")) cfg.train.widths.encoder = t["widths"]["encoder"].get<int>();
      if (t["widths"].contains("fuser")) cfg.train.widths.fuser = t["widths"]["fuser"].get<int>();
    }
  }
  if (j.contains("hindcast")) {
    const json& h = j["hindcast"];
    if (h.contains("init_stride_days")) cfg.init_stride_days = h["init_stride_days"].get<int>();
    if (h.contains("members")) cfg.members = h["members"].get<int>();
    if (h.contains("lead_steps")) cfg.lead_steps = h["lead_steps"].get<int>();
    if (h.contains("perturbation")) load_perturbation(h["perturbation"], cfg.perturbation);
  }
  if (j.contains("model_clim_sweep")) {
    const json& s = j["model_clim_sweep"];
    if (s.contains("init_stride_days")) cfg.sweep_stride_days = s["init_stride_days"].get<int>();
    if (s.contains("members")) cfg.sweep_members = s["members"].get<int>();
  }
  if (j.contains("verify")) {
    const json& v = j["verify"];
    if (v.contains("kinds")) {
      cfg.clim_kinds.clear();
      for (const auto& k : v["kinds"]) {
        cfg.clim_kinds.push_back(clim_kind_from_string(k.get<std::string>()));
      }
    }
    if (v.contains("variables")) cfg.verify_variables = v["variables"].get<std::vector<std::string>>();
    if (v.contains("windows")) cfg.window_labels = v["windows"].get<std::vector<std::string>>();
    if (v.contains("clim_halfwidth_days")) cfg.clim_halfwidth_days = v["clim_halfwidth_days"].get<int>();
    if (v.contains("spatial_acc_rows")) cfg.spatial_acc_rows = v["spatial_acc_rows"].get<bool>();
    if (v.contains("regions")) {
      cfg.regions.clear();
      for (const auto& r : v["regions"]) {
        if (r.is_string()) {
          const std::string name = r.get<std::string>();
          if (name == "global") {
            cfg.regions.push_back(Region::global());
          } else if (name == "tropics") {
            cfg.regions.push_back(Region::box("tropics", -20, 20, 0, 360));
          } else if (name == "north") {
            cfg.regions.push_back(Region::box("north", 20, 90, 0, 360));
          } else if (name == "south") {
            cfg.regions.push_back(Region::box("south", -90, -20, 0, 360));
          } else {
            throw ConfigError("unknown named region '" + name + "'");
          }
        } else {
          cfg.regions.push_back(Region::box(
              r["name"].get<std::string>(), r["lat_min"].get<double>(),
              r["lat_max"].get<double>(), r["lon_min"].get<double>(),
              r["lon_max"].get<double>()));
        }
      }
    }
  }
  if (j.contains("error_growth")) {
    const json& e = j["error_growth"];
    if (e.contains("inits")) cfg.error_growth_inits = e["inits"].get<int>();
    if (e.contains("steps")) cfg.error_growth_steps = e["steps"].get<int>();
  }
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  cfg.train.train_year_start = cfg.train_year_start;
  cfg.train.train_year_end = cfg.train_year_end;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void write_config(const ExperimentConfig& cfg,
                  const std::filesystem::path& path) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["toy"] = {{"sites", cfg.toy.sites},
              {"fast_per_site", cfg.toy.fast_per_site},
              {"rings", cfg.toy.rings},
              {"forcing", cfg.toy.forcing},
              {"coupling_h", cfg.toy.coupling_h},
              {"space_scale_b", cfg.toy.space_scale_b},
              {"time_scale_c", cfg.toy.time_scale_c},
              {"tau_ocean_days", cfg.toy.tau_ocean_days},
              {"tau_land_days", cfg.toy.tau_land_days},
              {"ocean_gain", cfg.toy.ocean_gain},
              {"precip_threshold", cfg.toy.precip_threshold},
              {"dt", cfg.toy.dt},
              {"units_per_6h", cfg.toy.units_per_6h},
              {"seasonal_amplitude", cfg.toy.seasonal_amplitude},
              {"ring_lats", cfg.toy.ring_lats}};
  j["truth"] = {{"years", cfg.truth_years}, {"spinup_years", cfg.spinup_years}};
  j["split"] = {{"train_year_start", cfg.train_year_start},
                {"train_year_end", cfg.train_year_end},
                {"test_year_start", cfg.test_year_start},
                {"test_year_end", cfg.test_year_end}};
  j["train"] = {{"stage1_epochs", cfg.train.stage1_epochs},
                {"stage2_epochs", cfg.train.stage2_epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"kl_weight", cfg.train.kl_weight},
                {"weight_decay", cfg.train.weight_decay},
                {"input_noise", cfg.train.input_noise},
                {"batch_size", cfg.train.batch_size},
                {"mode", model::to_string(cfg.train.mode)},
                {"mse_loss", cfg.train.mse_loss},
                {"residual_output", cfg.train.residual_output},
                {"widths",
                 {{"encoder", cfg.train.widths.encoder},
                  {"fuser", cfg.train.widths.fuser}}}};
  std::vector<int> ic_mask(cfg.perturbation.ic.mask.begin(),
                           cfg.perturbation.ic.mask.end());
  std::vector<int> sw_mask(cfg.perturbation.model.switch_mask.begin(),
                           cfg.perturbation.model.switch_mask.end());
  j["hindcast"] = {
      {"init_stride_days", cfg.init_stride_days},
      {"members", cfg.members},
      {"lead_steps", cfg.lead_steps},
      {"perturbation",
       {{"mode", ens::to_string(cfg.perturbation.mode)},
        {"ic",
         {{"amplitude", cfg.perturbation.ic.amplitude},
          {"octaves", cfg.perturbation.ic.octaves},
          {"base_wavelength", cfg.perturbation.ic.base_wavelength},
          {"persistence", cfg.perturbation.ic.persistence},
          {"seed", cfg.perturbation.ic.seed},
          {"mask", ic_mask}}},
        {"model",
         {{"seed_base", cfg.perturbation.model.seed_base},
          {"switch_mask", sw_mask}}},
        {"include_control_in_mean",
         cfg.perturbation.include_control_in_mean}}}};
  j["model_clim_sweep"] = {{"init_stride_days", cfg.sweep_stride_days},
                           {"members", cfg.sweep_members}};
  std::vector<std::string> kinds;
  for (ClimKind k : cfg.clim_kinds) kinds.push_back(to_string(k));
  json regions = json::array();
  for (const auto& r : cfg.regions) {
    regions.push_back({{"name", r.name},
                       {"lat_min", r.lat_min},
                       {"lat_max", r.lat_max},
                       {"lon_min", r.lon_min},
                       {"lon_max", r.lon_max}});
  }
  j["verify"] = {{"kinds", kinds},
                 {"variables", cfg.verify_variables},
                 {"windows", cfg.window_labels},
                 {"regions", regions},
                 {"clim_halfwidth_days", cfg.clim_halfwidth_days},
                 {"spatial_acc_rows", cfg.spatial_acc_rows}};
  j["error_growth"] = {{"inits", cfg.error_growth_inits},
                       {"steps", cfg.error_growth_steps}};
  j["out_dir"] = cfg.out_dir.string();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<std::int64_t> init_schedule(int year_start, int year_end,
                                        int stride_days) {
  std::vector<std::int64_t> inits;
  for (int year = year_start; year <= year_end; ++year) {
    for (int doy = 0; doy < kDaysPerYear; doy += stride_days) {
      inits.push_back(to_step({year, doy, 0}));
    }
  }
  return inits;
}

metrics::LeadWindow parse_window(const std::string& label, bool sum) {
  auto parse_int = [&](const std::string& s) {
    try {
      return std::stoi(s);
    } catch (...) {
      throw ConfigError("bad lead window label '" + label + "'");
    }
  };
  if (label.rfind("week", 0) == 0) {
    const std::string rest = label.substr(4);
    const auto dash = rest.find('-');
    if (dash == std::string::npos) {
      return metrics::LeadWindow::week(parse_int(rest), sum);
    }
    return metrics::LeadWindow::weeks(parse_int(rest.substr(0, dash)),
                                      parse_int(rest.substr(dash + 1)), sum);
  }
  if (label.rfind("month", 0) == 0) {
    return metrics::LeadWindow::month(parse_int(label.substr(5)), sum);
  }
  throw ConfigError("bad lead window label '" + label + "'");
}

std::vector<EnsembleHindcast> hindcast_sweep(
    const model::SurrogateModel& model, const FieldArchive& truth,
    const std::vector<std::int64_t>& inits, int n_members, int n_steps,
    const ens::PerturbationConfig& pert, int threads, int* n_failed) {
  if (inits.empty()) throw ConfigError("hindcast_sweep: empty init schedule");
  std::vector<int> truth_var(model.variables.size());
  for (std::size_t v = 0; v < model.variables.size(); ++v) {
    truth_var[v] = truth.var_index(model.variables[v]);
  }
  std::vector<EnsembleHindcast> out(inits.size());
  parallel_for(inits.size(), threads, [&](std::size_t i) {
    const std::int64_t t0 = inits[i];
    std::vector<const float*> snapshot(model.variables.size());
    for (std::size_t v = 0; v < model.variables.size(); ++v) {
      snapshot[v] = truth.field(truth_var[v], truth.times.index_of(t0));
    }
    // Per-init perturbation seeds derive from the campaign seed and t0, so
    // the sweep is independent of scheduling and init order.
    ens::PerturbationConfig per_init = pert;
    per_init.model.seed_base =
        derive_stream(pert.model.seed_base, static_cast<std::uint64_t>(t0));
    per_init.ic.seed = derive_stream(pert.ic.seed, static_cast<std::uint64_t>(t0));
    out[i] = ens::generate_members(model, snapshot, t0, n_members, n_steps,
                                   per_init);
  });
  if (n_failed != nullptr) {
    int failed = 0;
    for (const auto& h : out) {
      for (std::uint8_t f : h.member_failed) failed += f;
    }
    *n_failed = failed;
  }
  return out;
}

EnsembleHindcast persistence_hindcast(const FieldArchive& truth,
                                      const std::vector<std::string>& variables,
                                      std::int64_t init_step, int n_steps) {
  EnsembleHindcast h = EnsembleHindcast::create(truth.grid, variables,
                                                init_step, 1, n_steps);
  const int np = truth.grid.npoints();
  for (std::size_t v = 0; v < variables.size(); ++v) {
    const float* ic =
        truth.field(truth.var_index(variables[v]), truth.times.index_of(init_step));
    for (int lead = 0; lead <= n_steps; ++lead) {
      std::copy(ic, ic + np, h.field(0, static_cast<int>(v), lead));
    }
  }
  return h;
}

EnsembleHindcast climatology_hindcast(const Climatology& obs_clim,
                                      const std::vector<std::string>& variables,
                                      std::int64_t init_step, int n_steps) {
  EnsembleHindcast h = EnsembleHindcast::create(obs_clim.grid(), variables,
                                                init_step, 1, n_steps);
  const int np = obs_clim.grid().npoints();
  for (std::size_t v = 0; v < variables.size(); ++v) {
    const int cv = obs_clim.var_index(variables[v]);
    for (int lead = 0; lead <= n_steps; ++lead) {
      const float* mean = obs_clim.mean_field(cv, calendar_key(init_step + lead));
      std::copy(mean, mean + np, h.field(0, static_cast<int>(v), lead));
    }
  }
  return h;
}

WindowStats observed_window_stats(const FieldArchive& truth, int var,
                                  int clim_year_start, int clim_year_end,
                                  std::int64_t anchor_init,
                                  const metrics::LeadWindow& window,
                                  int halfwidth_days) {
  const int np = truth.grid.npoints();
  const std::int64_t cal = floor_mod(anchor_init, kStepsPerYear);
  std::vector<std::vector<float>> samples;
  for (int year = clim_year_start; year <= clim_year_end; ++year) {
    for (int shift = -halfwidth_days; shift <= halfwidth_days; ++shift) {
      const std::int64_t start = static_cast<std::int64_t>(year) * kStepsPerYear +
                                 cal + shift * kStepsPerDay;
      if (start + window.first_step < truth.times.start ||
          start + window.last_step >= truth.times.end()) {
        continue;
      }
      samples.emplace_back(np);
      window_values(truth, var, start, window, samples.back().data());
    }
  }
  WindowStats stats;
  stats_from_samples(samples, np, stats);
  return stats;
}

WindowStats model_window_stats(const std::vector<EnsembleHindcast>& sweep,
                               int var, std::int64_t anchor_init,
                               const metrics::LeadWindow& window,
                               int halfwidth_days) {
  if (sweep.empty()) throw ConfigError("model window stats: empty sweep");
  const int np = sweep.front().grid.npoints();
  const int anchor_doy = day_of_year(anchor_init);
  const int anchor_hod = hour_index(anchor_init);
  std::vector<std::vector<float>> samples;
  for (const auto& h : sweep) {
    if (hour_index(h.init_step) != anchor_hod) continue;
    if (doy_distance(day_of_year(h.init_step), anchor_doy) > halfwidth_days) {
      continue;
    }
    for (int m = 0; m < h.n_members; ++m) {
      if (h.member_failed[m]) continue;
      samples.emplace_back(np);
      window_member(h, m, var, window, samples.back().data());
    }
  }
  WindowStats stats;
  stats_from_samples(samples, np, stats);
  return stats;
}

std::vector<verify::VerifyCase> assemble_cases(const AssemblyInputs& in) {
  if (in.truth == nullptr || in.obs_clim == nullptr || in.hindcasts == nullptr) {
    throw ConfigError("assemble_cases: missing inputs");
  }
  const bool want_model =
      std::find(in.kinds.begin(), in.kinds.end(), ClimKind::model) !=
      in.kinds.end();
  if (want_model && (in.model_clim == nullptr || in.sweep == nullptr)) {
    throw ConfigError(
        "assemble_cases: model climatology rows need the model climatology "
        "and the hindcast sweep");
  }
  const auto& hindcasts = *in.hindcasts;
  if (hindcasts.size() < 2) {
    throw ConfigError("assemble_cases: need at least 2 init times");
  }
  const Grid& grid = in.truth->grid;
  const int np = grid.npoints();
  int n_members = hindcasts.front().n_members;
  for (const auto& h : hindcasts) {
    if (h.n_members != n_members) {
      throw ConfigError("assemble_cases: inconsistent member counts");
    }
  }

  std::vector<verify::VerifyCase> cases;
  for (const auto& variable : in.variables) {
    const int tv = in.truth->var_index(variable);
    const int cv = in.obs_clim->var_index(variable);
    const bool precip = is_precip(variable);

    verify::VerifyCase vc;
    vc.variable = variable;
    vc.grid = grid;
    vc.n_inits = static_cast<int>(hindcasts.size());
    vc.n_members = n_members;
    vc.precip_like = precip;
    for (const auto& label : in.windows) {
      vc.windows.push_back(metrics::LeadWindow{label.label, label.first_step,
                                               label.last_step, precip});
    }
    vc.climatological_probs = in.climatological_probs;
    for (ClimKind kind : in.kinds) {
      verify::VerifyCase::KindRef ref;
      ref.kind = kind;
      vc.refs.push_back(std::move(ref));
    }
    vc.allocate();

    // Windowed climatological statistics cache, keyed by init calendar key.
    std::map<std::pair<int, int>, WindowStats> obs_cache;   // (ck, window)
    std::map<std::pair<int, int>, WindowStats> model_cache;

    for (int w = 0; w < static_cast<int>(vc.windows.size()); ++w) {
      const auto& win = vc.windows[w];
      for (int i = 0; i < vc.n_inits; ++i) {
        const auto& h = hindcasts[i];
        const std::int64_t t0 = h.init_step;
        const int hv = h.var_index(variable);
        float* obs = vc.obs_window.data() + vc.wi(w, i);
        window_values(*in.truth, tv, t0, win, obs);
        for (int m = 0; m < n_members; ++m) {
          vc.member_valid[static_cast<std::size_t>(i) * n_members + m] =
              h.member_failed[m] ? 0 : 1;
          window_member(h, m, hv, win, vc.fc_window.data() + vc.wim(w, i, m));
        }
        window_clim_mean(*in.obs_clim, cv, t0, win,
                         vc.obs_clim_mean.data() + vc.wi(w, i));

        const int ck = calendar_key(t0);
        auto obs_it = obs_cache.find({ck, w});
        if (obs_it == obs_cache.end()) {
          obs_it = obs_cache
                       .emplace(std::make_pair(ck, w),
                                observed_window_stats(
                                    *in.truth, tv, in.clim_year_start,
                                    in.clim_year_end, t0, win,
                                    in.halfwidth_days))
                       .first;
        }
        const WindowStats& ostats = obs_it->second;
        std::copy(ostats.q33.begin(), ostats.q33.end(),
                  vc.obs_q33.begin() + vc.wi(w, i));
        std::copy(ostats.q66.begin(), ostats.q66.end(),
                  vc.obs_q66.begin() + vc.wi(w, i));
        std::copy(ostats.q90.begin(), ostats.q90.end(),
                  vc.obs_q90.begin() + vc.wi(w, i));

        for (std::size_t k = 0; k < vc.refs.size(); ++k) {
          auto& ref = vc.refs[k];
          if (ref.kind == ClimKind::observed) {
            std::copy(vc.obs_clim_mean.begin() + vc.wi(w, i),
                      vc.obs_clim_mean.begin() + vc.wi(w, i) + np,
                      ref.fc_clim_mean.begin() + vc.wi(w, i));
            std::copy(ostats.q33.begin(), ostats.q33.end(),
                      ref.q33.begin() + vc.wi(w, i));
            std::copy(ostats.q66.begin(), ostats.q66.end(),
                      ref.q66.begin() + vc.wi(w, i));
            std::copy(ostats.q90.begin(), ostats.q90.end(),
                      ref.q90.begin() + vc.wi(w, i));
          } else {
            const int mv = in.model_clim->var_index(variable);
            window_clim_mean(*in.model_clim, mv, t0, win,
                             ref.fc_clim_mean.data() + vc.wi(w, i));
            auto model_it = model_cache.find({ck, w});
            if (model_it == model_cache.end()) {
              model_it =
                  model_cache
                      .emplace(std::make_pair(ck, w),
                               model_window_stats(
                                   *in.sweep,
                                   (*in.sweep)[0].var_index(variable), t0, win,
                                   in.halfwidth_days))
                      .first;
            }
            const WindowStats& mstats = model_it->second;
            std::copy(mstats.q33.begin(), mstats.q33.end(),
                      ref.q33.begin() + vc.wi(w, i));
            std::copy(mstats.q66.begin(), mstats.q66.end(),
                      ref.q66.begin() + vc.wi(w, i));
            std::copy(mstats.q90.begin(), mstats.q90.end(),
                      ref.q90.begin() + vc.wi(w, i));
          }
        }

        if (precip) {
          // Dry mask from the climatological biweekly total anchored at the
          // window start; strictly-below-threshold points are excluded.
          std::vector<double> total(np, 0.0);
          for (int k = 0; k < 56; ++k) {
            const float* mean = in.obs_clim->mean_field(
                cv, calendar_key(t0 + win.first_step + k));
            for (int p = 0; p < np; ++p) total[p] += mean[p];
          }
          std::uint8_t* dry = vc.dry.data() + vc.wi(w, i);
          for (int p = 0; p < np; ++p) {
            dry[p] = (!std::isfinite(total[p]) || total[p] < 1.0) ? 1 : 0;
          }
        }
      }
    }
    cases.push_back(std::move(vc));
  }
  return cases;
}

HindcastOutputs run_hindcast(const ExperimentConfig& cfg,
                             const model::SurrogateModel& model,
                             const FieldArchive& truth,
                             const Climatology& obs_clim,
                             const Climatology* model_clim,
                             const std::vector<EnsembleHindcast>* sweep,
                             const std::vector<EnsembleHindcast>& hindcasts) {
  AssemblyInputs in;
  in.truth = &truth;
  in.obs_clim = &obs_clim;
  in.model_clim = model_clim;
  in.sweep = sweep;
  in.hindcasts = &hindcasts;
  in.clim_year_start = cfg.train_year_start;
  in.clim_year_end = cfg.train_year_end;
  in.halfwidth_days = cfg.clim_halfwidth_days;
  for (const auto& v : cfg.verify_variables) {
    bool available = true;
    for (const auto& h : hindcasts) {
      available = available &&
                  std::find(h.variables.begin(), h.variables.end(), v) !=
                      h.variables.end();
    }
    if (available) in.variables.push_back(v);
  }
  for (const auto& label : cfg.window_labels) {
    in.windows.push_back(parse_window(label, false));
  }
  in.kinds = cfg.clim_kinds;

  const auto cases = assemble_cases(in);
  verify::VerifyOptions options;
  options.regions = cfg.regions;
  options.threads = cfg.threads;
  options.spatial_acc_rows = cfg.spatial_acc_rows;
  const auto result = verify::verify_cases(cases, options);

  HindcastOutputs out;
  out.report.rows = result.rows;
  out.maps = result.maps;
  const std::size_t maps_per_case = result.maps.size() / std::max<std::size_t>(
                                                             1, cases.size());
  for (const auto& vc : cases) {
    for (std::size_t k = 0; k < maps_per_case; ++k) {
      out.map_variables.push_back(vc.variable);
    }
  }
  for (const auto& h : hindcasts) {
    for (std::uint8_t f : h.member_failed) out.failed_members += f;
  }
  return out;
}

std::vector<ErrorGrowthCurve> error_growth(const model::SurrogateModel& model,
                                           const FieldArchive& truth,
                                           const Climatology& obs_clim,
                                           const std::vector<std::int64_t>& inits,
                                           int n_steps, int ensemble_members,
                                           const ens::PerturbationConfig& pert,
                                           int threads) {
  if (static_cast<int>(inits.size()) < 2) {
    throw ConfigError("error_growth: need several init dates");
  }
  const int np = truth.grid.npoints();
  const int nv = model.nvars();
  std::vector<int> truth_var(nv);
  for (int v = 0; v < nv; ++v) truth_var[v] = truth.var_index(model.variables[v]);
  std::vector<int> clim_var(nv);
  for (int v = 0; v < nv; ++v) clim_var[v] = obs_clim.var_index(model.variables[v]);

  // Per-init squared-error sums, deterministic and ensemble-mean paths.
  struct InitAcc {
    std::vector<double> det;  // [var][lead+1] weighted mean squared anomaly err
    std::vector<double> ens;
    std::vector<double> wsum;
  };
  std::vector<InitAcc> accs(inits.size());
  const bool with_ensemble = ensemble_members > 1;

  parallel_for(inits.size(), threads, [&](std::size_t i) {
    const std::int64_t t0 = inits[i];
    ens::PerturbationConfig per_init = pert;
    per_init.mode = with_ensemble ? pert.mode : ens::PerturbMode::none;
    per_init.model.seed_base =
        derive_stream(pert.model.seed_base, static_cast<std::uint64_t>(t0));
    per_init.ic.seed = derive_stream(pert.ic.seed, static_cast<std::uint64_t>(t0));
    std::vector<const float*> snapshot(nv);
    for (int v = 0; v < nv; ++v) {
      snapshot[v] = truth.field(truth_var[v], truth.times.index_of(t0));
    }
    const EnsembleHindcast block = ens::generate_members(
        model, snapshot, t0, with_ensemble ? ensemble_members : 1, n_steps,
        per_init);

    InitAcc& acc = accs[i];
    acc.det.assign(static_cast<std::size_t>(nv) * (n_steps + 1), 0.0);
    acc.ens.assign(static_cast<std::size_t>(nv) * (n_steps + 1), 0.0);
    acc.wsum.assign(n_steps + 1, 0.0);
    std::vector<double> ens_mean(np);
    for (int lead = 0; lead <= n_steps; ++lead) {
      const int ck = calendar_key(t0 + lead);
      for (int v = 0; v < nv; ++v) {
        const float* clim_mean = obs_clim.mean_field(clim_var[v], ck);
        const float* obs =
            truth.field(truth_var[v], truth.times.index_of(t0 + lead));
        const float* det = block.field(0, v, lead);
        if (with_ensemble) {
          std::fill(ens_mean.begin(), ens_mean.end(), 0.0);
          int n_valid = 0;
          for (int m = 0; m < block.n_members; ++m) {
            if (block.member_failed[m]) continue;
            const float* f = block.field(m, v, lead);
            for (int p = 0; p < np; ++p) ens_mean[p] += f[p];
            ++n_valid;
          }
          for (int p = 0; p < np; ++p) ens_mean[p] /= std::max(1, n_valid);
        }
        double det_acc = 0.0, ens_acc = 0.0, wsum = 0.0;
        for (int lat = 0; lat < truth.grid.nlat; ++lat) {
          const double wgt = truth.grid.weights[lat];
          for (int lon = 0; lon < truth.grid.nlon; ++lon) {
            const int p = truth.grid.point(lat, lon);
            const double o = obs[p] - clim_mean[p];
            const double fd = det[p] - clim_mean[p];
            det_acc += wgt * (fd - o) * (fd - o);
            if (with_ensemble) {
              const double fe = ens_mean[p] - clim_mean[p];
              ens_acc += wgt * (fe - o) * (fe - o);
            }
            wsum += wgt;
          }
        }
        acc.det[static_cast<std::size_t>(v) * (n_steps + 1) + lead] =
            det_acc / wsum;
        acc.ens[static_cast<std::size_t>(v) * (n_steps + 1) + lead] =
            ens_acc / wsum;
        acc.wsum[lead] = 1.0;
      }
    }
  });

  // sigma_clim: weighted anomaly std over the evaluated init period span.
  std::vector<ErrorGrowthCurve> curves(nv);
  for (int v = 0; v < nv; ++v) {
    curves[v].variable = model.variables[v];
    double ss = 0.0, wsum = 0.0;
    const std::int64_t span_start = inits.front();
    const std::int64_t span_end = inits.back() + n_steps;
    for (std::int64_t t = span_start; t <= span_end; t += kStepsPerDay) {
      const float* obs = truth.field(truth_var[v], truth.times.index_of(t));
      const float* clim_mean =
          obs_clim.mean_field(clim_var[v], calendar_key(t));
      for (int lat = 0; lat < truth.grid.nlat; ++lat) {
        const double wgt = truth.grid.weights[lat];
        for (int lon = 0; lon < truth.grid.nlon; ++lon) {
          const int p = truth.grid.point(lat, lon);
          const double a = obs[p] - clim_mean[p];
          ss += wgt * a * a;
          wsum += wgt;
        }
      }
    }
    curves[v].sigma_clim = std::sqrt(ss / wsum);

    curves[v].rmse_deterministic.assign(n_steps + 1, 0.0);
    if (with_ensemble) curves[v].rmse_ensemble_mean.assign(n_steps + 1, 0.0);
    for (int lead = 0; lead <= n_steps; ++lead) {
      double det = 0.0, ens = 0.0;
      for (std::size_t i = 0; i < inits.size(); ++i) {
        det += accs[i].det[static_cast<std::size_t>(v) * (n_steps + 1) + lead];
        ens += accs[i].ens[static_cast<std::size_t>(v) * (n_steps + 1) + lead];
      }
      curves[v].rmse_deterministic[lead] =
          std::sqrt(det / static_cast<double>(inits.size()));
      if (with_ensemble) {
        curves[v].rmse_ensemble_mean[lead] =
            std::sqrt(ens / static_cast<double>(inits.size()));
      }
    }
  }
  return curves;
}

AblationTable run_ablation(const ExperimentConfig& cfg,
                           const FieldArchive& truth) {
  const Climatology obs_clim = compute_climatology(
      truth, cfg.train_year_start, cfg.train_year_end, cfg.clim_halfwidth_days);

  std::vector<std::int64_t> inits =
      init_schedule(cfg.test_year_start, cfg.test_year_end, cfg.init_stride_days);
  // Keep only inits whose full lead range stays inside the archive.
  std::erase_if(inits, [&](std::int64_t t0) {
    return t0 + cfg.lead_steps >= truth.times.end();
  });
  if (inits.size() < 2) throw ConfigError("ablation: too few init dates");

  AblationTable table;
  struct ModeRun {
    std::string label;
    model::Mode mode;
    ens::PerturbMode pert;
  };
  const std::vector<ModeRun> runs = {
      {"V1", model::Mode::V1, ens::PerturbMode::none},
      {"AOL", model::Mode::AOL, ens::PerturbMode::none},
      {"W2S", model::Mode::W2S, ens::PerturbMode::none},
      {"W2S+IC", model::Mode::W2S, ens::PerturbMode::ic},
      {"W2S+IC+model", model::Mode::W2S, ens::PerturbMode::both},
  };

  std::map<model::Mode, model::SurrogateModel> trained;
  for (const auto& run : runs) {
    if (trained.count(run.mode)) continue;
    model::TrainConfig tc = cfg.train;
    tc.mode = run.mode;
    tc.seed = cfg.seed;
    tc.train_year_start = cfg.train_year_start;
    tc.train_year_end = cfg.train_year_end;
    const auto result = model::train(truth, tc);
    if (result.diverged) {
      table.complete = false;
      continue;
    }
    trained.emplace(run.mode, result.model);
  }

  const std::vector<metrics::LeadWindow> weeks = {
      metrics::LeadWindow::week(1), metrics::LeadWindow::week(2),
      metrics::LeadWindow::week(3), metrics::LeadWindow::week(4),
      metrics::LeadWindow::week(5), metrics::LeadWindow::week(6)};

  for (const auto& run : runs) {
    auto it = trained.find(run.mode);
    if (it == trained.end()) continue;
    const model::SurrogateModel& mdl = it->second;
    const bool ensemble = run.pert != ens::PerturbMode::none;
    ens::PerturbationConfig pert = cfg.perturbation;
    pert.mode = run.pert;
    const auto hindcasts =
        hindcast_sweep(mdl, truth, inits, ensemble ? cfg.members : 1,
                       cfg.lead_steps, pert, cfg.threads);

    AssemblyInputs in;
    in.truth = &truth;
    in.obs_clim = &obs_clim;
    in.hindcasts = &hindcasts;
    in.clim_year_start = cfg.train_year_start;
    in.clim_year_end = cfg.train_year_end;
    in.halfwidth_days = cfg.clim_halfwidth_days;
    in.kinds = {ClimKind::observed};
    in.windows = weeks;
    for (const auto& v : mdl.variables) {
      if (v == "z500a" || v == "t2ma") in.variables.push_back(v);
    }
    const auto cases = assemble_cases(in);
    verify::VerifyOptions options;
    options.regions = {Region::global()};
    options.threads = cfg.threads;
    options.emit_maps = false;
    options.rmse_rows = false;
    const auto result = verify::verify_cases(cases, options);

    for (const auto& variable : in.variables) {
      AblationRow row;
      row.label = run.label;
      row.variable = variable;
      row.weekly_acc.assign(6, kNaN);
      for (const auto& r : result.rows) {
        if (r.variable != variable || r.metric != "ACC") continue;
        for (int w = 0; w < 6; ++w) {
          if (r.lead_window == "week" + std::to_string(w + 1)) {
            row.weekly_acc[w] = r.value;
          }
        }
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_maps_csv(const Grid& grid, const std::string& variable,
                    const std::vector<verify::MapArtifact>& maps,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / ("maps_" + variable + ".csv"));
  if (!out) throw ConfigError("cannot write map CSV");
  out << "metric,climatology_kind,lead_window,lat,lon,value\n";
  for (const auto& m : maps) {
    for (int i = 0; i < grid.nlat; ++i) {
      for (int j = 0; j < grid.nlon; ++j) {
        out << m.metric << ',' << m.clim_kind << ',' << m.window << ','
            << metrics::format_double(grid.lat[i]) << ','
            << metrics::format_double(grid.lon[j]) << ','
            << metrics::format_double(m.map[grid.point(i, j)]) << "\n";
      }
    }
  }
}

void write_ablation_csv(const AblationTable& table,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "label,variable,week,acc\n";
  for (const auto& row : table.rows) {
    for (std::size_t w = 0; w < row.weekly_acc.size(); ++w) {
      out << row.label << ',' << row.variable << ',' << (w + 1) << ','
          << metrics::format_double(row.weekly_acc[w]) << "\n";
    }
  }
}

AblationTable read_ablation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "label,variable,week,acc") {
    throw ConfigError("bad ablation CSV header");
  }
  AblationTable table;
  std::map<std::pair<std::string, std::string>, std::size_t> row_of;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    f.push_back(cur);
    if (f.size() != 4) throw ConfigError("bad ablation CSV row");
    const auto key = std::make_pair(f[0], f[1]);
    auto it = row_of.find(key);
    if (it == row_of.end()) {
      it = row_of.emplace(key, table.rows.size()).first;
      table.rows.push_back({f[0], f[1], std::vector<double>(6, kNaN)});
    }
    const int week = std::stoi(f[2]);
    if (week < 1 || week > 6) throw ConfigError("bad ablation week index");
    table.rows[it->second].weekly_acc[week - 1] = metrics::parse_double(f[3]);
  }
  return table;
}

void write_error_growth_csv(const std::vector<ErrorGrowthCurve>& curves,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "variable,lead_step,rmse_deterministic,rmse_ensemble_mean,"
         "saturation\n";
  for (const auto& c : curves) {
    for (std::size_t lead = 0; lead < c.rmse_deterministic.size(); ++lead) {
      out << c.variable << ',' << lead << ','
          << metrics::format_double(c.rmse_deterministic[lead]) << ','
          << metrics::format_double(c.rmse_ensemble_mean.empty()
                                        ? kNaN
                                        : c.rmse_ensemble_mean[lead])
          << ',' << metrics::format_double(c.saturation()) << "\n";
    }
  }
}

void emit_report_svgs(const metrics::SkillReport& report,
                      const std::vector<ErrorGrowthCurve>& curves,
                      const AblationTable* ablation,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#ff7f0e", "#9467bd", "#8c564b"};

  // Weekly ACC per (variable, climatology kind), global region.
  std::map<std::string, std::vector<svg::Series>> charts;
  for (const auto& row : report.rows) {
    if (row.metric != "ACC" || row.region != "global") continue;
    if (row.lead_window.rfind("week", 0) != 0) continue;
    if (row.lead_window.find('-') != std::string::npos) continue;
    const int week = std::stoi(row.lead_window.substr(4));
    auto& series_list = charts[row.variable];
    svg::Series* s = nullptr;
    for (auto& cand : series_list) {
      if (cand.label == row.clim_kind) s = &cand;
    }
    if (s == nullptr) {
      series_list.push_back(svg::Series{row.clim_kind, {}, {}, "", false});
      s = &series_list.back();
      s->color = kColors[(series_list.size() - 1) % 6];
      s->dashed = row.clim_kind == "model";
    }
    s->x.push_back(week);
    s->y.push_back(row.value);
  }
  for (const auto& [variable, series] : charts) {
    svg::write_line_chart(dir / ("skill_" + variable + ".svg"),
                          "Weekly anomaly correlation: " + variable,
                          "lead week", "ACC", series);
  }

  for (const auto& c : curves) {
    std::vector<svg::Series> series;
    svg::Series det{"deterministic", {}, {}, "#d62728", false};
    for (std::size_t lead = 0; lead < c.rmse_deterministic.size(); ++lead) {
      det.x.push_back(static_cast<double>(lead) / kStepsPerDay);
      det.y.push_back(c.rmse_deterministic[lead]);
    }
    series.push_back(std::move(det));
    if (!c.rmse_ensemble_mean.empty()) {
      svg::Series ens{"ensemble mean", {}, {}, "#1f77b4", false};
      for (std::size_t lead = 0; lead < c.rmse_ensemble_mean.size(); ++lead) {
        ens.x.push_back(static_cast<double>(lead) / kStepsPerDay);
        ens.y.push_back(c.rmse_ensemble_mean[lead]);
      }
      series.push_back(std::move(ens));
    }
    svg::Series sat{"sqrt(2) sigma_clim", {}, {}, "#555555", true};
    sat.x = {0.0,
             static_cast<double>(c.rmse_deterministic.size() - 1) / kStepsPerDay};
    sat.y = {c.saturation(), c.saturation()};
    series.push_back(std::move(sat));
    svg::write_line_chart(dir / ("error_growth_" + c.variable + ".svg"),
                          "Error growth: " + c.variable, "lead (days)",
                          "anomaly RMSE", series);
  }

  if (ablation != nullptr) {
    std::map<std::string, std::vector<svg::Series>> by_var;
    for (const auto& row : ablation->rows) {
      auto& series_list = by_var[row.variable];
      svg::Series s{row.label, {}, {}, kColors[series_list.size() % 6],
                    row.label.find('+') != std::string::npos};
      for (std::size_t w = 0; w < row.weekly_acc.size(); ++w) {
        s.x.push_back(static_cast<double>(w + 1));
        s.y.push_back(row.weekly_acc[w]);
      }
      series_list.push_back(std::move(s));
    }
    for (const auto& [variable, series] : by_var) {
      svg::write_line_chart(dir / ("ablation_" + variable + ".svg"),
                            "Ablation ladder: " + variable, "lead week", "ACC",
                            series);
    }
  }
}

void emit_map_svgs(const Grid& grid, const std::string& variable,
                   const std::vector<verify::MapArtifact>& maps,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& m : maps) {
    svg::write_heatmap(dir / ("map_" + variable + "_" + m.metric + "_" +
                              m.clim_kind + "_" + m.window + ".svg"),
                       variable + " " + m.metric + " (" + m.clim_kind + ", " +
                           m.window + ")",
                       grid, m.map, 1.0);
  }
}

}  // namespace subcast::harness
