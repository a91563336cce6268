// Command-line front end: truth generation, training, hindcast campaigns,
// verification, intraseasonal indices, error growth, the ablation ladder and
// report rendering. Every output byte is a deterministic function of the
// config file and the seed (run logs carry the only timestamps).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "subcast/harness.hpp"

namespace fs = std::filesystem;
using namespace subcast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out_dir;
};

harness::ExperimentConfig resolve_config(const GlobalArgs& args) {
  harness::ExperimentConfig cfg = args.config_path.empty()
                                      ? harness::default_config()
                                      : harness::load_config(args.config_path);
  if (args.seed_set) {
    cfg.seed = args.seed;
    cfg.train.seed = args.seed;
  }
  if (args.threads > 0) cfg.threads = args.threads;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  cfg.validate();
  return cfg;
}

void log_line(const fs::path& out_dir, const std::string& message) {
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now);
  log << "[" << secs.count() << "] " << message << "\n";
  std::cerr << message << "\n";
}

FieldArchive load_or_fail(const fs::path& path, const char* what) {
  if (!fs::exists(path / "manifest.json")) {
    throw ConfigError(std::string(what) + " archive not found at " +
                      path.string() + " (run gen-truth first?)");
  }
  return load_archive(path);
}

std::vector<std::int64_t> test_inits(const harness::ExperimentConfig& cfg,
                                     const FieldArchive& truth, int lead_steps) {
  auto inits = harness::init_schedule(cfg.test_year_start, cfg.test_year_end,
                                      cfg.init_stride_days);
  std::erase_if(inits, [&](std::int64_t t0) {
    return t0 + lead_steps >= truth.times.end();
  });
  if (inits.size() < 2) {
    throw ConfigError("init schedule leaves fewer than 2 usable init dates");
  }
  return inits;
}

std::vector<EnsembleHindcast> load_hindcast_dir(const fs::path& dir) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "ensemble.json")) {
      entries.push_back(e.path());
    }
  }
  std::sort(entries.begin(), entries.end());
  std::vector<EnsembleHindcast> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_hindcast(e));
  if (out.empty()) {
    throw ConfigError("no ensemble hindcasts under " + dir.string());
  }
  return out;
}

int run_gen_truth(const harness::ExperimentConfig& cfg) {
  log_line(cfg.out_dir, "generating truth: " +
                            std::to_string(cfg.truth_years) + " years, seed " +
                            std::to_string(cfg.seed));
  const FieldArchive truth =
      toy::gen_truth(cfg.toy, cfg.truth_years, cfg.seed, cfg.spinup_years);
  write_archive(truth, cfg.out_dir / "truth");
  log_line(cfg.out_dir, "truth written to " + (cfg.out_dir / "truth").string());
  return kExitOk;
}

int run_climatology(const harness::ExperimentConfig& cfg, bool model_kind) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  if (!model_kind) {
    const Climatology clim =
        compute_climatology(truth, cfg.train_year_start, cfg.train_year_end,
                            cfg.clim_halfwidth_days);
    write_climatology(clim, cfg.out_dir / "clim_observed");
    log_line(cfg.out_dir, "observed climatology written");
    return kExitOk;
  }
  const model::SurrogateModel mdl = model::load_model(cfg.out_dir / "model");
  auto inits = harness::init_schedule(cfg.train_year_start, cfg.train_year_end,
                                      cfg.sweep_stride_days);
  std::erase_if(inits, [&](std::int64_t t0) {
    return t0 + cfg.lead_steps >= truth.times.end();
  });
  int failed = 0;
  const auto sweep =
      harness::hindcast_sweep(mdl, truth, inits, cfg.sweep_members,
                              cfg.lead_steps, cfg.perturbation, cfg.threads,
                              &failed);
  fs::create_directories(cfg.out_dir / "sweep");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    write_hindcast(sweep[i],
                   cfg.out_dir / "sweep" /
                       ("init_" + format_step(sweep[i].init_step)));
  }
  const Climatology clim = compute_model_climatology(
      sweep, cfg.train_year_start, cfg.train_year_end);
  write_climatology(clim, cfg.out_dir / "clim_model");
  log_line(cfg.out_dir, "model climatology written (" +
                            std::to_string(failed) + " failed members)");
  return failed == 0 ? kExitOk : kExitPartial;
}

int run_train(const harness::ExperimentConfig& cfg) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  model::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.train_year_start = cfg.train_year_start;
  tc.train_year_end = cfg.train_year_end;
  log_line(cfg.out_dir, "training mode " + model::to_string(tc.mode));
  const auto result = model::train(truth, tc);
  model::write_loss_history(result.history, cfg.out_dir / "loss_history.csv");
  if (result.diverged) {
    log_line(cfg.out_dir, "training diverged; loss history kept");
    return kExitNumerical;
  }
  model::save_model(result.model, cfg.out_dir / "model");
  log_line(cfg.out_dir, "checkpoint written to " +
                            (cfg.out_dir / "model").string());
  return kExitOk;
}

int run_hindcast_cmd(const harness::ExperimentConfig& cfg) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  const model::SurrogateModel mdl = model::load_model(cfg.out_dir / "model");
  const auto inits = test_inits(cfg, truth, cfg.lead_steps);
  int failed = 0;
  const auto hindcasts =
      harness::hindcast_sweep(mdl, truth, inits, cfg.members, cfg.lead_steps,
                              cfg.perturbation, cfg.threads, &failed);
  fs::create_directories(cfg.out_dir / "hindcasts");
  for (const auto& h : hindcasts) {
    write_hindcast(h, cfg.out_dir / "hindcasts" /
                          ("init_" + format_step(h.init_step)));
  }
  log_line(cfg.out_dir,
           "hindcasts written: " + std::to_string(hindcasts.size()) +
               " inits x " + std::to_string(cfg.members) + " members, " +
               std::to_string(failed) + " failed members");
  return failed == 0 ? kExitOk : kExitPartial;
}

int run_verify(const harness::ExperimentConfig& cfg) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  const model::SurrogateModel mdl = model::load_model(cfg.out_dir / "model");
  const Climatology obs_clim = load_climatology(cfg.out_dir / "clim_observed");
  const auto hindcasts = load_hindcast_dir(cfg.out_dir / "hindcasts");

  std::optional<Climatology> model_clim;
  std::vector<EnsembleHindcast> sweep;
  const bool want_model =
      std::find(cfg.clim_kinds.begin(), cfg.clim_kinds.end(),
                ClimKind::model) != cfg.clim_kinds.end();
  if (want_model) {
    model_clim = load_climatology(cfg.out_dir / "clim_model");
    sweep = load_hindcast_dir(cfg.out_dir / "sweep");
  }

  const auto outputs = harness::run_hindcast(
      cfg, mdl, truth, obs_clim, model_clim ? &*model_clim : nullptr,
      want_model ? &sweep : nullptr, hindcasts);
  metrics::write_skill_csv(outputs.report, cfg.out_dir / "skill.csv");

  // Baselines through the same path (climatology probabilities and
  // persistence), observed climatology only.
  {
    std::vector<std::int64_t> inits;
    for (const auto& h : hindcasts) inits.push_back(h.init_step);
    std::vector<EnsembleHindcast> clim_blocks, persist_blocks;
    std::vector<std::string> base_vars;
    for (const auto& v : cfg.verify_variables) {
      if (truth.has_var(v)) base_vars.push_back(v);
    }
    for (std::int64_t t0 : inits) {
      clim_blocks.push_back(
          harness::climatology_hindcast(obs_clim, base_vars, t0, cfg.lead_steps));
      persist_blocks.push_back(
          harness::persistence_hindcast(truth, base_vars, t0, cfg.lead_steps));
    }
    harness::AssemblyInputs in;
    in.truth = &truth;
    in.obs_clim = &obs_clim;
    in.clim_year_start = cfg.train_year_start;
    in.clim_year_end = cfg.train_year_end;
    in.halfwidth_days = cfg.clim_halfwidth_days;
    in.variables = base_vars;
    for (const auto& label : cfg.window_labels) {
      in.windows.push_back(harness::parse_window(label, false));
    }
    in.kinds = {ClimKind::observed};
    verify::VerifyOptions options;
    options.regions = cfg.regions;
    options.threads = cfg.threads;
    options.emit_maps = false;

    in.hindcasts = &clim_blocks;
    in.climatological_probs = true;
    auto result = verify::verify_cases(harness::assemble_cases(in), options);
    metrics::SkillReport clim_report{result.rows};
    metrics::write_skill_csv(clim_report,
                             cfg.out_dir / "skill_baseline_climatology.csv");

    in.hindcasts = &persist_blocks;
    in.climatological_probs = false;
    result = verify::verify_cases(harness::assemble_cases(in), options);
    metrics::SkillReport persist_report{result.rows};
    metrics::write_skill_csv(persist_report,
                             cfg.out_dir / "skill_baseline_persistence.csv");
  }

  // Map artifacts per variable.
  std::map<std::string, std::vector<verify::MapArtifact>> by_var;
  for (std::size_t k = 0; k < outputs.maps.size(); ++k) {
    by_var[outputs.map_variables[k]].push_back(outputs.maps[k]);
  }
  for (const auto& [variable, maps] : by_var) {
    harness::write_maps_csv(truth.grid, variable, maps, cfg.out_dir / "maps");
    harness::emit_map_svgs(truth.grid, variable, maps, cfg.out_dir / "maps");
  }
  log_line(cfg.out_dir, "skill report written (" +
                            std::to_string(outputs.report.rows.size()) +
                            " rows)");
  return outputs.failed_members == 0 ? kExitOk : kExitPartial;
}

int run_index(const harness::ExperimentConfig& cfg, const std::string& which,
              const std::string& centers_path) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  const Climatology obs_clim = load_climatology(cfg.out_dir / "clim_observed");
  const AnomalySeries anoms = anomaly(truth, obs_clim);
  fs::create_directories(cfg.out_dir / "indices");

  if (which == "mjo") {
    const AnomalySeries intra = indices::intraseasonal_filter(anoms);
    const auto olr = indices::meridional_mean(intra, intra.var_index("olra"),
                                              -15.0, 15.0);
    const auto z500 = indices::meridional_mean(intra, intra.var_index("z500a"),
                                               -15.0, 15.0);
    const auto t2m = indices::meridional_mean(intra, intra.var_index("t2ma"),
                                              -15.0, 15.0);
    const auto nt = static_cast<int>(intra.times.count);
    const auto basis = indices::rmm_basis(olr, z500, t2m, nt, truth.grid.nlon);
    std::vector<std::int64_t> times(nt);
    for (int t = 0; t < nt; ++t) times[t] = intra.times.at(t);
    const auto idx = indices::rmm_project(olr, z500, t2m, nt, times, basis);
    indices::write_rmm_csv(idx, cfg.out_dir / "indices" / "mjo.csv");
    const auto hov = indices::hovmoller(intra, intra.var_index("olra"));
    std::ofstream out(cfg.out_dir / "indices" / "hovmoller_olra.csv");
    out << "time,lon,value\n";
    for (std::size_t t = 0; t < hov.times.size(); ++t) {
      for (std::size_t j = 0; j < hov.lons.size(); ++j) {
        out << hov.times[t] << ',' << metrics::format_double(hov.lons[j]) << ','
            << metrics::format_double(hov.at(t, j)) << "\n";
      }
    }
    log_line(cfg.out_dir, "MJO-style index and Hovmoller written");
    return kExitOk;
  }

  if (which == "nao") {
    const int var = anoms.var_index("z500a");
    const auto basis = indices::nao_basis(anoms, var);
    const auto idx = indices::nao_index(anoms, var, basis);
    indices::write_index_csv(idx, cfg.out_dir / "indices" / "nao.csv");
    log_line(cfg.out_dir, "NAO-style index written");
    return kExitOk;
  }

  if (which == "tele") {
    const auto table = centers_path.empty()
                           ? indices::builtin_center_table()
                           : indices::load_center_table(centers_path);
    // Standardize anomalies per point over the training years.
    AnomalySeries standardized = anoms;
    const int np = truth.grid.npoints();
    for (std::size_t v = 0; v < standardized.variables.size(); ++v) {
      std::vector<double> ss(np, 0.0);
      std::int64_t n = 0;
      for (std::int64_t t = 0; t < standardized.times.count; ++t) {
        const int year = year_of(standardized.times.at(t));
        if (year < cfg.train_year_start || year > cfg.train_year_end) continue;
        const float* f = standardized.field(static_cast<int>(v), t);
        for (int p = 0; p < np; ++p) ss[p] += static_cast<double>(f[p]) * f[p];
        ++n;
      }
      for (int p = 0; p < np; ++p) {
        ss[p] = std::sqrt(std::max(ss[p] / std::max<std::int64_t>(1, n), 1e-12));
      }
      for (std::int64_t t = 0; t < standardized.times.count; ++t) {
        float* f = standardized.field(static_cast<int>(v), t);
        for (int p = 0; p < np; ++p) {
          f[p] = static_cast<float>(f[p] / ss[p]);
        }
      }
    }
    const int var = standardized.var_index("z500a");
    for (const auto& pattern : table) {
      const auto idx = indices::point_pattern_index(standardized, var, pattern);
      indices::write_index_csv(
          idx, cfg.out_dir / "indices" / ("tele_" + pattern.name + ".csv"));
    }
    log_line(cfg.out_dir, "teleconnection indices written");
    return kExitOk;
  }
  throw ConfigError("unknown index subcommand '" + which + "'");
}

int run_error_growth(const harness::ExperimentConfig& cfg) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  const model::SurrogateModel mdl = model::load_model(cfg.out_dir / "model");
  const Climatology obs_clim = load_climatology(cfg.out_dir / "clim_observed");
  auto inits = test_inits(cfg, truth, cfg.error_growth_steps);
  if (static_cast<int>(inits.size()) > cfg.error_growth_inits) {
    inits.resize(cfg.error_growth_inits);
  }
  const auto curves = harness::error_growth(
      mdl, truth, obs_clim, inits, cfg.error_growth_steps, cfg.members,
      cfg.perturbation, cfg.threads);
  harness::write_error_growth_csv(curves, cfg.out_dir / "error_growth.csv");
  harness::emit_report_svgs({}, curves, nullptr, cfg.out_dir / "plots");
  log_line(cfg.out_dir, "error growth curves written");
  return kExitOk;
}

int run_ablation_cmd(const harness::ExperimentConfig& cfg) {
  const FieldArchive truth = load_or_fail(cfg.out_dir / "truth", "truth");
  const auto table = harness::run_ablation(cfg, truth);
  harness::write_ablation_csv(table, cfg.out_dir / "ablation.csv");
  harness::emit_report_svgs({}, {}, &table, cfg.out_dir / "plots");
  log_line(cfg.out_dir, "ablation table written");
  return table.complete ? kExitOk : kExitPartial;
}

int run_report(const harness::ExperimentConfig& cfg) {
  metrics::SkillReport report;
  if (fs::exists(cfg.out_dir / "skill.csv")) {
    report = metrics::read_skill_csv(cfg.out_dir / "skill.csv");
  }
  std::vector<harness::ErrorGrowthCurve> curves;
  harness::AblationTable ablation;
  bool have_ablation = false;
  if (fs::exists(cfg.out_dir / "ablation.csv")) {
    ablation = harness::read_ablation_csv(cfg.out_dir / "ablation.csv");
    have_ablation = true;
  }
  if (report.rows.empty() && curves.empty() && !have_ablation) {
    log_line(cfg.out_dir, "warning: nothing to report");
    return kExitConfig;
  }
  harness::emit_report_svgs(report, curves,
                            have_ablation ? &ablation : nullptr,
                            cfg.out_dir / "plots");
  log_line(cfg.out_dir, "plots written to " +
                            (cfg.out_dir / "plots").string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale subseasonal hindcast toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config JSON");
  auto* seed_opt = app.add_option("--seed", args.seed, "override config seed");
  app.add_option("--threads", args.threads, "worker thread count");
  app.add_option("--out", args.out_dir, "output directory");

  auto* gen = app.add_subcommand("gen-truth", "generate the toy truth record");
  auto* train = app.add_subcommand("train", "train the surrogate");
  auto* hindcast = app.add_subcommand("hindcast", "run the hindcast campaign");
  auto* clim = app.add_subcommand("climatology", "compute climatologies");
  bool clim_model = false;
  clim->add_flag("--model", clim_model,
                 "model climatology (runs the training-period sweep)");
  auto* verify_cmd = app.add_subcommand("verify", "verify hindcasts");
  auto* index = app.add_subcommand("index", "intraseasonal indices");
  std::string index_kind;
  index->add_option("kind", index_kind, "mjo | nao | tele")->required();
  std::string centers_path;
  index->add_option("--centers", centers_path, "teleconnection center table");
  auto* growth = app.add_subcommand("error-growth", "deterministic error growth");
  auto* ablation = app.add_subcommand("ablation", "architecture/ensemble ladder");
  auto* report = app.add_subcommand("report", "render CSV outputs as SVG");

  CLI11_PARSE(app, argc, argv);
  args.seed_set = seed_opt->count() > 0;

  try {
    const harness::ExperimentConfig cfg = resolve_config(args);
    if (gen->parsed()) return run_gen_truth(cfg);
    if (train->parsed()) return run_train(cfg);
    if (clim->parsed()) return run_climatology(cfg, clim_model);
    if (hindcast->parsed()) return run_hindcast_cmd(cfg);
    if (verify_cmd->parsed()) return run_verify(cfg);
    if (index->parsed()) return run_index(cfg, index_kind, centers_path);
    if (growth->parsed()) return run_error_growth(cfg);
    if (ablation->parsed()) return run_ablation_cmd(cfg);
    if (report->parsed()) return run_report(cfg);
    std::cerr << "no subcommand\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const PartialResult& e) {
    std::cerr << "partial results: " << e.what() << "\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
