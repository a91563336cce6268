#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "subcast/archive.hpp"
#include "subcast/rng.hpp"

namespace subcast::model {

// Architecture modes. All three share one code path; they differ only in the
// variable set, the encoder grouping, and whether the exchange block exists.
//   V1:  atmosphere variables only, single encoder.
//   AOL: all variables through a single concatenated encoder, no exchange.
//   W2S: per-subsystem encoders plus the residual exchange block.
enum class Mode { V1, AOL, W2S };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

// y = W x + b, row-major weights [out][in].
struct Affine {
  int in = 0, out = 0;
  std::vector<double> w, b;

  static Affine zeros(int in, int out);
  void apply(const double* x, double* y) const;
};

// (mu-map, logsigma2-map) pair attached to a feature vector; when sampled,
// features x become mu(x) + sigma(x) * eps with eps ~ N(0, I).
struct PerturbLayer {
  Affine mu, logvar;
};

struct EncoderGroup {
  std::string name;
  std::vector<int> var_index;  // contiguous indices into the model variables
  Affine map;                  // flattened group fields -> features, tanh
  PerturbLayer pert;
};

struct Widths {
  int encoder = 32;  // per subsystem group
  int fuser = 64;
};

// The decoder's mean head predicts the state increment on top of an identity
// passthrough of the input. Without the passthrough the mean is confined to
// a rank-(fuser width) subspace and cannot represent the identity map, so
// autoregressive forecasts lose state detail after a single step.
inline constexpr bool kDefaultResidualOutput = true;

inline constexpr double kLogVarClamp = 10.0;

struct SurrogateModel {
  Mode mode = Mode::W2S;
  Grid grid;
  std::vector<std::string> variables;
  std::vector<double> norm_mean, norm_std;  // per-variable standardization
  std::vector<EncoderGroup> encoders;
  bool has_exchange = false;
  Affine exchange;  // residual cross-subsystem mixing on concatenated features
  Affine fuser;     // concat -> hidden, tanh
  PerturbLayer fuser_pert;
  Affine dec_mean;    // hidden -> nvars * npoints
  Affine dec_logvar;  // hidden -> nvars
  bool residual_output = kDefaultResidualOutput;
  std::vector<std::uint8_t> switch_mask;  // per variable, 1 = perturbable
  std::uint64_t seed = 0;

  int npoints() const { return grid.npoints(); }
  int nvars() const { return static_cast<int>(variables.size()); }
  int state_size() const { return nvars() * npoints(); }
  int concat_width() const;
  int var_index(const std::string& name) const;
  // A perturbation layer is live when any of its variables is switched on;
  // the fuser layer is live when any variable at all is switched on.
  bool group_perturbable(int g) const;
  bool any_perturbable() const;
  void validate() const;
};

// Flat view over every parameter tensor, in a fixed serialization order.
struct ParamBlock {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};
std::vector<ParamBlock> param_blocks(SurrogateModel& model);
std::size_t param_count(const SurrogateModel& model);
std::vector<double> params_to_flat(const SurrogateModel& model);
void params_from_flat(SurrogateModel& model, const std::vector<double>& flat);

// Builds a randomly initialized model. Variables and grouping follow the
// mode; the AOL single encoder gets one group-width slot per subsystem it
// replaces. mu-maps start at identity and logsigma2-maps at -6 so stage-2
// sampling begins near-deterministic.
SurrogateModel build_model(Mode mode, const Grid& grid, const Widths& widths,
                           std::uint64_t seed,
                           bool residual_output = kDefaultResidualOutput);

// Variables a mode consumes, in model order.
std::vector<std::string> mode_variables(Mode mode);

enum class Perturb { off, sample };

struct ForwardCache {
  // Per encoder group: input slice, preactivation, tanh output, perturbation
  // internals (empty when the layer is pass-through).
  struct Layer {
    std::vector<double> input, pre, act;
    std::vector<double> mu, logvar, eps, out;
    bool sampled = false;
  };
  std::vector<Layer> enc;
  std::vector<double> concat;
  std::vector<double> exchanged;
  Layer fuser;
  std::vector<double> mean;        // standardized next-state mean
  std::vector<double> logvar_raw;  // decoder logvar before clamping
  std::vector<double> logvar;      // clamped, per variable
};

// Forward pass on a standardized state vector (nvars * npoints). When
// `perturb` is sample and `noise` is null, fresh eps are drawn from rng;
// a non-null `noise` supplies fixed eps draws (finite-difference testing).
struct NoiseDraws {
  std::vector<std::vector<double>> enc_eps;  // per group
  std::vector<double> fuser_eps;
};
void forward(const SurrogateModel& model, const std::vector<double>& state,
             Perturb perturb, RngStream* rng, ForwardCache& cache,
             const NoiseDraws* noise = nullptr);

// Gaussian negative log-likelihood with per-variable log-variance:
//   mean over elements of 0.5 [ (yhat - y)^2 exp(-logvar) + logvar ]
double p_loss(const std::vector<double>& mean,
              const std::vector<double>& logvar_per_var,
              const std::vector<double>& truth, int npoints);
// 0.5 mean (yhat - y)^2; the fallback loss behind TrainConfig.mse_loss.
double mse_loss(const std::vector<double>& mean,
                const std::vector<double>& truth);

// Closed-form KL of N(mu, sigma^2) against N(0, 1), summed over elements:
//   0.5 sum (mu^2 + sigma^2 - logsigma2 - 1)
double kl_loss(const std::vector<double>& mu, const std::vector<double>& logvar);

struct LossBreakdown {
  double total = 0.0;
  double p = 0.0;
  std::vector<double> kl_terms;  // one entry per live perturbation layer
  double kl_sum() const {
    double s = 0.0;
    for (double k : kl_terms) s += k;
    return s;
  }
};

struct LossConfig {
  double kl_weight = 1e-4;  // lambda
  bool include_kl = false;  // stage 2 only
  bool mse = false;
};

LossBreakdown evaluate_loss(const SurrogateModel& model,
                            const ForwardCache& cache,
                            const std::vector<double>& truth,
                            const LossConfig& cfg);

// Reverse-mode gradients of the total loss for every parameter, accumulated
// into `grads` (flat layout of param_blocks). Throws NumericalError naming
// the offending layer when a non-finite gradient appears.
void backward(const SurrogateModel& model, const ForwardCache& cache,
              const std::vector<double>& truth, const LossConfig& cfg,
              std::vector<double>& grads);

struct TrainConfig {
  int stage1_epochs = 30;
  int stage2_epochs = 10;
  double learning_rate = 5e-4;
  double beta1 = 0.9, beta2 = 0.9;
  double kl_weight = 1e-4;
  // Decoupled weight decay (the optimizer is AdamW-style).
  double weight_decay = 1e-4;
  // Standardized-space noise added to training inputs; teaches the
  // autoregressive map to contract toward the attractor instead of drifting
  // once its own prediction errors are fed back.
  double input_noise = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;
  Mode mode = Mode::W2S;
  Widths widths;
  bool mse_loss = false;
  bool residual_output = kDefaultResidualOutput;
  int train_year_start = 0;  // full toy years within the truth archive
  int train_year_end = 2;
};

struct LossRecord {
  int stage = 1;
  int epoch = 0;
  double total = 0.0, p = 0.0, kl = 0.0;
};

struct TrainResult {
  SurrogateModel model;
  std::vector<LossRecord> history;
  bool diverged = false;
};

// Two-stage training: stage 1 optimizes the probability loss with the
// perturbation layers inactive; stage 2 switches them on and optimizes
// P_loss + lambda * sum KL with Adam-style updates throughout.
TrainResult train(const FieldArchive& truth, const TrainConfig& cfg);

// Standardization helpers. `fields` holds one raw field per model variable.
std::vector<double> standardize(const SurrogateModel& model,
                                const std::vector<const float*>& fields);
void destandardize(const SurrogateModel& model,
                   const std::vector<double>& state,
                   std::vector<std::vector<float>>& fields);

struct RolloutResult {
  // steps[k] holds the state after k+1 autoregressive iterations,
  // destandardized, concatenated per variable.
  std::vector<std::vector<float>> steps;
  bool truncated = false;
  int valid_steps = 0;
};

// Autoregressive rollout feeding each mean prediction back as input; the
// variance head is ignored. Perturbation, when enabled, resamples every step
// from the caller's stream.
RolloutResult rollout(const SurrogateModel& model,
                      const std::vector<const float*>& initial_fields,
                      int n_steps, Perturb perturb, RngStream* rng);

void write_loss_history(const std::vector<LossRecord>& history,
                        const std::filesystem::path& path);

// Checkpoint: model.json header plus a raw little-endian float64 payload of
// the flat parameter vector.
void save_model(const SurrogateModel& model, const std::filesystem::path& dir);
SurrogateModel load_model(const std::filesystem::path& dir);

}  // namespace subcast::model
