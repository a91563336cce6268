#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "subcast/climatology.hpp"
#include "subcast/ensemble.hpp"
#include "subcast/forecaster.hpp"
#include "subcast/indices.hpp"
#include "subcast/metrics.hpp"
#include "subcast/toyearth.hpp"
#include "subcast/verify.hpp"

namespace subcast::harness {

struct ExperimentConfig {
  std::uint64_t seed = 42;
  int threads = 1;

  toy::ToyParams toy;
  int truth_years = 5;
  int spinup_years = 1;

  int train_year_start = 0;
  int train_year_end = 2;
  int test_year_start = 3;
  int test_year_end = 4;

  model::TrainConfig train;

  // Hindcast campaign over the test period.
  int init_stride_days = 5;
  int members = 8;
  int lead_steps = 168;
  ens::PerturbationConfig perturbation;

  // Model-climatology sweep over the training period.
  int sweep_stride_days = 10;
  int sweep_members = 2;

  // Verification settings.
  std::vector<ClimKind> clim_kinds = {ClimKind::observed, ClimKind::model};
  std::vector<std::string> verify_variables = {"z500a", "t2ma", "precipa"};
  std::vector<std::string> window_labels = {"week1", "week2",   "week3",
                                            "week4", "week5",   "week6",
                                            "week3-4", "week5-6"};
  std::vector<Region> regions = {Region::global()};
  int clim_halfwidth_days = 7;
  bool spatial_acc_rows = false;

  int error_growth_inits = 10;
  int error_growth_steps = 360;

  std::filesystem::path out_dir = "out";

  void validate() const;
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(const ExperimentConfig& cfg,
                  const std::filesystem::path& path);

// Init schedule: every `stride_days` days at 00h across the year span.
std::vector<std::int64_t> init_schedule(int year_start, int year_end,
                                        int stride_days);

// Lead window parser for labels like week1, week3-4, month2.
metrics::LeadWindow parse_window(const std::string& label, bool sum);

// --- campaign building blocks -------------------------------------------

// One ensemble hindcast per init, parallel across inits. Failed members are
// recorded in the blocks; `n_failed`, when given, receives the total count.
std::vector<EnsembleHindcast> hindcast_sweep(
    const model::SurrogateModel& model, const FieldArchive& truth,
    const std::vector<std::int64_t>& inits, int n_members, int n_steps,
    const ens::PerturbationConfig& pert, int threads, int* n_failed = nullptr);

// Trivial-model baselines sharing the verification path.
EnsembleHindcast persistence_hindcast(const FieldArchive& truth,
                                      const std::vector<std::string>& variables,
                                      std::int64_t init_step, int n_steps);
EnsembleHindcast climatology_hindcast(const Climatology& obs_clim,
                                      const std::vector<std::string>& variables,
                                      std::int64_t init_step, int n_steps);

// Windowed statistics of the truth record over the climatology years:
// per-point mean/quantiles of window aggregates, pooled over years and
// +-halfwidth-day shifts around the anchor init.
struct WindowStats {
  std::vector<float> mean, q33, q66, q90;  // [npoints]
};
WindowStats observed_window_stats(const FieldArchive& truth, int var,
                                  int clim_year_start, int clim_year_end,
                                  std::int64_t anchor_init,
                                  const metrics::LeadWindow& window,
                                  int halfwidth_days);
// Same, sampling a hindcast sweep (years x inits-within-halfwidth x members).
WindowStats model_window_stats(const std::vector<EnsembleHindcast>& sweep,
                               int var, std::int64_t anchor_init,
                               const metrics::LeadWindow& window,
                               int halfwidth_days);

// Assembles verification cases for the given hindcast campaign. When model
// climatology rows are requested both `model_clim` and `sweep` must be given.
struct AssemblyInputs {
  const FieldArchive* truth = nullptr;
  const Climatology* obs_clim = nullptr;
  const Climatology* model_clim = nullptr;                 // optional
  const std::vector<EnsembleHindcast>* sweep = nullptr;    // optional
  const std::vector<EnsembleHindcast>* hindcasts = nullptr;
  int clim_year_start = 0, clim_year_end = 0;
  int halfwidth_days = 7;
  std::vector<std::string> variables;
  std::vector<metrics::LeadWindow> windows;
  std::vector<ClimKind> kinds = {ClimKind::observed};
  bool climatological_probs = false;  // climatology-forecast baseline
};
std::vector<verify::VerifyCase> assemble_cases(const AssemblyInputs& in);

// --- campaign drivers ------------------------------------------------------

struct HindcastOutputs {
  metrics::SkillReport report;
  std::vector<verify::MapArtifact> maps;  // per variable, in case order
  std::vector<std::string> map_variables;
  int failed_members = 0;
};

HindcastOutputs run_hindcast(const ExperimentConfig& cfg,
                             const model::SurrogateModel& model,
                             const FieldArchive& truth,
                             const Climatology& obs_clim,
                             const Climatology* model_clim,
                             const std::vector<EnsembleHindcast>* sweep,
                             const std::vector<EnsembleHindcast>& hindcasts);

struct ErrorGrowthCurve {
  std::string variable;
  std::vector<double> rmse_deterministic;  // per lead step 1..n
  std::vector<double> rmse_ensemble_mean;  // empty when members == 1
  double sigma_clim = 0.0;                 // anomaly std over the test period
  double saturation() const { return sigma_clim * std::sqrt(2.0); }
};

std::vector<ErrorGrowthCurve> error_growth(const model::SurrogateModel& model,
                                           const FieldArchive& truth,
                                           const Climatology& obs_clim,
                                           const std::vector<std::int64_t>& inits,
                                           int n_steps, int ensemble_members,
                                           const ens::PerturbationConfig& pert,
                                           int threads);

struct AblationRow {
  std::string label;  // V1, AOL, W2S, W2S+IC, W2S+IC+model
  std::string variable;
  std::vector<double> weekly_acc;  // weeks 1..6
};

struct AblationTable {
  std::vector<AblationRow> rows;
  bool complete = true;
};

AblationTable run_ablation(const ExperimentConfig& cfg,
                           const FieldArchive& truth);

// --- report emission -------------------------------------------------------

void write_maps_csv(const Grid& grid, const std::string& variable,
                    const std::vector<verify::MapArtifact>& maps,
                    const std::filesystem::path& dir);
void write_ablation_csv(const AblationTable& table,
                        const std::filesystem::path& path);
AblationTable read_ablation_csv(const std::filesystem::path& path);
void write_error_growth_csv(const std::vector<ErrorGrowthCurve>& curves,
                            const std::filesystem::path& path);

// SVG artifacts: skill-vs-week lines, error-growth curves, skill maps.
void emit_report_svgs(const metrics::SkillReport& report,
                      const std::vector<ErrorGrowthCurve>& curves,
                      const AblationTable* ablation,
                      const std::filesystem::path& dir);
void emit_map_svgs(const Grid& grid, const std::string& variable,
                   const std::vector<verify::MapArtifact>& maps,
                   const std::filesystem::path& dir);

}  // namespace subcast::harness
