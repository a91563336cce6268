#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subcast/forecaster.hpp"
#include "subcast/hindcast.hpp"
#include "subcast/rng.hpp"

namespace subcast::ens {

enum class PerturbMode { none, ic, model, both };

std::string to_string(PerturbMode mode);
PerturbMode perturb_mode_from_string(const std::string& s);

// Initial-condition perturbation settings. Amplitude is a fraction of the
// per-variable climatological sigma; the noise itself is octave-summed
// gradient noise, longitude-periodic, rescaled to [-1, 1].
struct IcConfig {
  double amplitude = 0.1;
  int octaves = 2;
  double base_wavelength = 8.0;  // grid cells
  double persistence = 0.5;      // per-octave amplitude ratio
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> mask;  // per model variable; empty = all on
};

struct ModelPertConfig {
  std::vector<std::uint8_t> switch_mask;  // empty = keep the model's default
  std::uint64_t seed_base = 0;
};

struct PerturbationConfig {
  PerturbMode mode = PerturbMode::none;
  IcConfig ic;
  ModelPertConfig model;
  bool include_control_in_mean = true;

  std::uint64_t hash() const;
};

// Gradient-lattice noise with `octaves` octaves summed at `persistence`
// amplitude ratio, periodic in longitude, rescaled so max |value| is 1.
std::vector<double> perlin_field(int nlat, int nlon, const IcConfig& config,
                                 std::uint64_t seed);

// Per variable v: value + amplitude * sigma_clim(v) * noise, with a fresh
// noise draw per variable. Variables excluded by the mask are untouched.
// sigma_clim comes from the model's standardization stats.
void perturb_ic(std::vector<std::vector<float>>& fields,
                const model::SurrogateModel& model, const IcConfig& config,
                std::uint64_t member_stream);

// Member m rolls out from an (optionally) ic-perturbed snapshot with
// (optionally) sampled model perturbations, on rng stream
// derive(seed_base, m). Member 0 is the unperturbed control. Rollout
// failures are recorded per member, not fatal to the batch.
EnsembleHindcast generate_members(const model::SurrogateModel& model,
                                  const std::vector<const float*>& snapshot,
                                  std::int64_t init_step, int n_members,
                                  int n_steps,
                                  const PerturbationConfig& config);

}  // namespace subcast::ens
