#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subcast/archive.hpp"
#include "subcast/rng.hpp"

namespace subcast::toy {

// Chaotic coupled truth generator: a two-scale ring atmosphere per latitude
// ring, plus slow ocean and land-moisture reservoirs. Per ring r, cyclic k:
//   dX_k/dt = -X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F_r
//             - (h c / b) sum_j Y_{j,k} + gamma O_k
//   dY_j/dt = -c b Y_{j+1}(Y_{j+2} - Y_{j-1}) - c Y_j + (h c / b) X_(j div J)
//   dO_k/dt = (gamma X_k - O_k) / tau_ocean
//   dL_k/dt = (P_k - L_k) / tau_land,  P_k = max(0, X_k - precip_threshold)
struct ToyParams {
  int sites = 36;          // K, slow variables per ring
  int fast_per_site = 10;  // J
  int rings = 8;           // R
  std::vector<double> forcing;  // F_r per ring; resized to `rings` on validate
  double coupling_h = 1.0;      // h
  double space_scale_b = 10.0;  // b
  double time_scale_c = 10.0;   // c
  double tau_ocean_days = 90.0;
  double tau_land_days = 10.0;
  double ocean_gain = 0.8;  // gamma
  double precip_threshold = 1.0;
  double dt = 0.005;               // integrator step, model time units
  double units_per_6h = 0.05;      // model time units per archive step
  double seasonal_amplitude = 0.2; // fractional modulation of F_r
  std::vector<double> ring_lats = {-70, -50, -30, -10, 10, 30, 50, 70};

  double units_per_day() const { return units_per_6h * kStepsPerDay; }
  double tau_ocean_units() const { return tau_ocean_days * units_per_day(); }
  double tau_land_units() const { return tau_land_days * units_per_day(); }
  int substeps_per_snapshot() const;
  void validate() const;
};

struct ToyState {
  int rings = 0, sites = 0, fast_per_site = 0;
  std::vector<double> x;      // [rings][sites]
  std::vector<double> y;      // [rings][sites*fast_per_site]
  std::vector<double> ocean;  // [rings][sites]
  std::vector<double> land;   // [rings][sites]

  static ToyState zeros(const ToyParams& p);
  std::size_t slow_size() const {
    return static_cast<std::size_t>(rings) * sites;
  }
  bool finite() const;
};

// Time derivative with the given per-ring forcing (seasonally modulated by
// the caller); pure, no state mutation.
ToyState tendency(const ToyState& state, const ToyParams& params,
                  const std::vector<double>& forcing);
ToyState tendency(const ToyState& state, const ToyParams& params);

// Classical RK4 update over params.dt. Throws NumericalError when any value
// exceeds the blow-up bound. Land moisture is clipped at zero; undershoot
// beyond 1e-9 is treated as divergence.
ToyState step_rk4(const ToyState& state, const ToyParams& params,
                  const std::vector<double>& forcing);
ToyState step_rk4(const ToyState& state, const ToyParams& params);

// Seasonally modulated per-ring forcing at an absolute model day-of-year
// position (fractional). Northern rings peak half a year after southern.
std::vector<double> seasonal_forcing(const ToyParams& params,
                                     double day_of_year);

// Variable analogs emitted by observe():
//   z500a  = X
//   t2ma   = X + 0.5 O + 0.25 L
//   precipa = max(0, X - precip_threshold)   (6-hour accumulation)
//   olra   = 2 - precipa
//   ocean  = O,  land = L
const std::vector<std::string>& truth_variables();

// Grid rows follow ring_lats order (sorted increasing); site k maps to
// longitude column k at 360/sites-degree spacing.
Grid make_grid(const ToyParams& params);

// One snapshot of all truth variables on the grid.
void observe(const ToyState& state, const ToyParams& params,
             std::vector<std::vector<float>>& fields);

// Random initial state near the attractor, deterministic in the seed.
ToyState initial_state(const ToyParams& params, std::uint64_t seed);

// Advances the state over one 6-hour archive interval (multiple RK4 steps),
// with forcing re-evaluated each substep. `step` is the absolute 6-h index.
ToyState advance_snapshot(const ToyState& state, const ToyParams& params,
                          std::int64_t step);

// Spins up for `spinup_years` and emits a 6-hourly archive over `years`
// toy years starting at year 0, day 0.
FieldArchive gen_truth(const ToyParams& params, int years, std::uint64_t seed,
                       int spinup_years = 1);

}  // namespace subcast::toy
