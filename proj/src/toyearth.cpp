#include "subcast/toyearth.hpp"

#include <algorithm>
#include <cmath>

namespace subcast::toy {

namespace {
constexpr double kBlowupBound = 1e6;
constexpr double kLandUndershootTol = 1e-9;
constexpr double kTwoPi = 6.28318530717958647692;

void check_finite(const ToyState& s, const char* where) {
  if (!s.finite()) {
    throw NumericalError(std::string("toy state non-finite in ") + where);
  }
}

void axpy(std::vector<double>& out, const std::vector<double>& a, double h,
          const std::vector<double>& d) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + h * d[i];
}
}  // namespace

int ToyParams::substeps_per_snapshot() const {
  const double raw = units_per_6h / dt;
  const int n = static_cast<int>(std::lround(raw));
  if (n < 1 || std::abs(raw - n) > 1e-9) {
    throw ConfigError("toy params: dt must divide units_per_6h evenly");
  }
  return n;
}

void ToyParams::validate() const {
  if (sites < 4) throw ConfigError("toy params: need at least 4 sites per ring");
  if (fast_per_site < 1) throw ConfigError("toy params: fast_per_site < 1");
  if (rings < 1) throw ConfigError("toy params: rings < 1");
  if (static_cast<int>(ring_lats.size()) != rings) {
    throw ConfigError("toy params: ring_lats length != rings");
  }
  if (!(dt > 0.0) || !(units_per_6h > 0.0)) {
    throw ConfigError("toy params: non-positive time step");
  }
  if (!(tau_ocean_days > tau_land_days) || !(tau_land_days > 0.0)) {
    throw ConfigError("toy params: require tau_ocean > tau_land > 0");
  }
  if (!forcing.empty() && static_cast<int>(forcing.size()) != rings) {
    throw ConfigError("toy params: forcing length != rings");
  }
  substeps_per_snapshot();
}

ToyState ToyState::zeros(const ToyParams& p) {
  ToyState s;
  s.rings = p.rings;
  s.sites = p.sites;
  s.fast_per_site = p.fast_per_site;
  s.x.assign(s.slow_size(), 0.0);
  s.y.assign(s.slow_size() * p.fast_per_site, 0.0);
  s.ocean.assign(s.slow_size(), 0.0);
  s.land.assign(s.slow_size(), 0.0);
  return s;
}

bool ToyState::finite() const {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x) || std::abs(x) > kBlowupBound) return false;
    }
    return true;
  };
  return ok(x) && ok(y) && ok(ocean) && ok(land);
}

ToyState tendency(const ToyState& state, const ToyParams& params,
                  const std::vector<double>& forcing) {
  if (state.rings != params.rings || state.sites != params.sites ||
      state.fast_per_site != params.fast_per_site) {
    throw ConfigError("toy tendency: state/params shape mismatch");
  }
  if (static_cast<int>(forcing.size()) != params.rings) {
    throw ConfigError("toy tendency: forcing length mismatch");
  }
  check_finite(state, "tendency");

  const int K = params.sites;
  const int J = params.fast_per_site;
  const int nf = K * J;
  const double hcb = params.coupling_h * params.time_scale_c /
                     params.space_scale_b;
  const double cb = params.time_scale_c * params.space_scale_b;
  const double c = params.time_scale_c;
  const double tau_o = params.tau_ocean_units();
  const double tau_l = params.tau_land_units();

  ToyState d = ToyState::zeros(params);
  for (int r = 0; r < params.rings; ++r) {
    const double* x = state.x.data() + static_cast<std::size_t>(r) * K;
    const double* y = state.y.data() + static_cast<std::size_t>(r) * nf;
    const double* o = state.ocean.data() + static_cast<std::size_t>(r) * K;
    const double* l = state.land.data() + static_cast<std::size_t>(r) * K;
    double* dx = d.x.data() + static_cast<std::size_t>(r) * K;
    double* dy = d.y.data() + static_cast<std::size_t>(r) * nf;
    double* dox = d.ocean.data() + static_cast<std::size_t>(r) * K;
    double* dl = d.land.data() + static_cast<std::size_t>(r) * K;

    for (int k = 0; k < K; ++k) {
      const int km1 = (k - 1 + K) % K;
      const int km2 = (k - 2 + K) % K;
      const int kp1 = (k + 1) % K;
      double fast_sum = 0.0;
      for (int j = 0; j < J; ++j) fast_sum += y[k * J + j];
      dx[k] = -x[km1] * (x[km2] - x[kp1]) - x[k] + forcing[r] -
              hcb * fast_sum + params.ocean_gain * o[k];
      dox[k] = (params.ocean_gain * x[k] - o[k]) / tau_o;
      const double precip = std::max(0.0, x[k] - params.precip_threshold);
      dl[k] = (precip - l[k]) / tau_l;
    }
    for (int j = 0; j < nf; ++j) {
      const int jp1 = (j + 1) % nf;
      const int jp2 = (j + 2) % nf;
      const int jm1 = (j - 1 + nf) % nf;
      dy[j] = -cb * y[jp1] * (y[jp2] - y[jm1]) - c * y[j] + hcb * x[j / J];
    }
  }
  return d;
}

ToyState tendency(const ToyState& state, const ToyParams& params) {
  std::vector<double> forcing = params.forcing;
  if (forcing.empty()) forcing.assign(params.rings, 8.0);
  return tendency(state, params, forcing);
}

ToyState step_rk4(const ToyState& state, const ToyParams& params,
                  const std::vector<double>& forcing) {
  const double h = params.dt;
  const ToyState k1 = tendency(state, params, forcing);
  ToyState tmp = state;

  auto stage = [&](const ToyState& base, double frac, const ToyState& slope) {
    axpy(tmp.x, base.x, frac * h, slope.x);
    axpy(tmp.y, base.y, frac * h, slope.y);
    axpy(tmp.ocean, base.ocean, frac * h, slope.ocean);
    axpy(tmp.land, base.land, frac * h, slope.land);
  };

  stage(state, 0.5, k1);
  const ToyState k2 = tendency(tmp, params, forcing);
  stage(state, 0.5, k2);
  const ToyState k3 = tendency(tmp, params, forcing);
  stage(state, 1.0, k3);
  const ToyState k4 = tendency(tmp, params, forcing);

  ToyState out = state;
  const double w = h / 6.0;
  for (std::size_t i = 0; i < out.x.size(); ++i) {
    out.x[i] += w * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
    out.ocean[i] +=
        w * (k1.ocean[i] + 2.0 * k2.ocean[i] + 2.0 * k3.ocean[i] + k4.ocean[i]);
    out.land[i] +=
        w * (k1.land[i] + 2.0 * k2.land[i] + 2.0 * k3.land[i] + k4.land[i]);
  }
  for (std::size_t i = 0; i < out.y.size(); ++i) {
    out.y[i] += w * (k1.y[i] + 2.0 * k2.y[i] + 2.0 * k3.y[i] + k4.y[i]);
  }
  for (double& l : out.land) {
    if (l < 0.0) {
      if (l < -kLandUndershootTol) {
        throw NumericalError("toy integration diverged: land moisture " +
                             std::to_string(l));
      }
      l = 0.0;
    }
  }
  if (!out.finite()) {
    throw NumericalError("toy integration diverged (blow-up bound exceeded)");
  }
  return out;
}

ToyState step_rk4(const ToyState& state, const ToyParams& params) {
  std::vector<double> forcing = params.forcing;
  if (forcing.empty()) forcing.assign(params.rings, 8.0);
  return step_rk4(state, params, forcing);
}

std::vector<double> seasonal_forcing(const ToyParams& params,
                                     double day_of_year) {
  std::vector<double> forcing = params.forcing;
  if (forcing.empty()) forcing.assign(params.rings, 8.0);
  for (int r = 0; r < params.rings; ++r) {
    // Opposite phase across the equator.
    const double phase = params.ring_lats[r] >= 0.0 ? 0.0 : 0.5;
    forcing[r] *= 1.0 + params.seasonal_amplitude *
                            std::sin(kTwoPi * (day_of_year / kDaysPerYear + phase));
  }
  return forcing;
}

const std::vector<std::string>& truth_variables() {
  static const std::vector<std::string> kVars = {"z500a", "t2ma", "precipa",
                                                 "olra", "ocean", "land"};
  return kVars;
}

Grid make_grid(const ToyParams& params) {
  std::vector<double> lats = params.ring_lats;
  std::sort(lats.begin(), lats.end());
  std::vector<double> lons(params.sites);
  for (int k = 0; k < params.sites; ++k) {
    lons[k] = 360.0 * k / params.sites;
  }
  return Grid::regular(std::move(lats), std::move(lons));
}

namespace {
// Ring order in state arrays follows params.ring_lats; grid rows are sorted
// by latitude. row_of[r] is the grid row for state ring r.
std::vector<int> ring_rows(const ToyParams& params) {
  std::vector<double> sorted = params.ring_lats;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> rows(params.rings);
  for (int r = 0; r < params.rings; ++r) {
    const auto it =
        std::find(sorted.begin(), sorted.end(), params.ring_lats[r]);
    if (it == sorted.end()) throw ConfigError("ring latitude mapping mismatch");
    rows[r] = static_cast<int>(it - sorted.begin());
  }
  return rows;
}
}  // namespace

void observe(const ToyState& state, const ToyParams& params,
             std::vector<std::vector<float>>& fields) {
  if (state.rings != params.rings || state.sites != params.sites) {
    throw ConfigError("observe: state/grid mapping mismatch");
  }
  const int K = params.sites;
  const auto rows = ring_rows(params);
  const std::size_t np = state.slow_size();
  fields.assign(truth_variables().size(), std::vector<float>(np));
  for (int r = 0; r < params.rings; ++r) {
    for (int k = 0; k < K; ++k) {
      const std::size_t src = static_cast<std::size_t>(r) * K + k;
      const std::size_t dst = static_cast<std::size_t>(rows[r]) * K + k;
      const double x = state.x[src];
      const double o = state.ocean[src];
      const double l = state.land[src];
      const double precip = std::max(0.0, x - params.precip_threshold);
      fields[0][dst] = static_cast<float>(x);                    // z500a
      fields[1][dst] = static_cast<float>(x + 0.5 * o + 0.25 * l);  // t2ma
      fields[2][dst] = static_cast<float>(precip);               // precipa
      fields[3][dst] = static_cast<float>(2.0 - precip);         // olra
      fields[4][dst] = static_cast<float>(o);                    // ocean
      fields[5][dst] = static_cast<float>(l);                    // land
    }
  }
}

ToyState initial_state(const ToyParams& params, std::uint64_t seed) {
  params.validate();
  ToyState s = ToyState::zeros(params);
  RngStream rng(derive_stream(seed, 0x10c0ffee));
  const double f0 = params.forcing.empty() ? 8.0 : params.forcing.front();
  for (double& x : s.x) x = f0 * (0.5 + 0.1 * rng.normal());
  for (double& y : s.y) y = 0.05 * rng.normal();
  // Ocean starts on its slow manifold; land dry.
  for (std::size_t i = 0; i < s.ocean.size(); ++i) {
    s.ocean[i] = params.ocean_gain * s.x[i];
  }
  return s;
}

ToyState advance_snapshot(const ToyState& state, const ToyParams& params,
                          std::int64_t step) {
  const int n = params.substeps_per_snapshot();
  const double day0 = static_cast<double>(floor_mod(step, kStepsPerYear)) /
                      kStepsPerDay;
  const double days_per_substep = params.dt / params.units_per_day();
  ToyState s = state;
  for (int i = 0; i < n; ++i) {
    const double doy = std::fmod(day0 + i * days_per_substep, kDaysPerYear);
    s = step_rk4(s, params, seasonal_forcing(params, doy));
  }
  return s;
}

FieldArchive gen_truth(const ToyParams& params, int years, std::uint64_t seed,
                       int spinup_years) {
  params.validate();
  if (years < 1) throw ConfigError("gen_truth: years < 1");
  if (spinup_years < 1) throw ConfigError("gen_truth: spin-up must cover >= 1 year");

  ToyState s = initial_state(params, seed);
  // Spin-up runs through the same seasonal forcing, ending at day 0.
  for (std::int64_t step = -static_cast<std::int64_t>(spinup_years) *
                            kStepsPerYear;
       step < 0; ++step) {
    s = advance_snapshot(s, params, step);
  }

  const std::int64_t count = static_cast<std::int64_t>(years) * kStepsPerYear;
  FieldArchive archive =
      FieldArchive::create(make_grid(params), truth_variables(),
                           TimeAxis{0, count});
  std::vector<std::vector<float>> fields;
  for (std::int64_t t = 0; t < count; ++t) {
    observe(s, params, fields);
    for (std::size_t v = 0; v < fields.size(); ++v) {
      std::copy(fields[v].begin(), fields[v].end(),
                archive.field(static_cast<int>(v), t));
    }
    s = advance_snapshot(s, params, t);
  }
  return archive;
}

}  // namespace subcast::toy
