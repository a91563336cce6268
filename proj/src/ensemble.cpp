#include "subcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace subcast {

using nlohmann::json;

EnsembleHindcast EnsembleHindcast::create(Grid grid,
                                          std::vector<std::string> variables,
                                          std::int64_t init_step, int n_members,
                                          int n_leads) {
  if (n_members < 1) throw ConfigError("hindcast: need at least one member");
  if (n_leads < 1) throw ConfigError("hindcast: need at least one lead step");
  EnsembleHindcast h;
  h.grid = std::move(grid);
  h.variables = std::move(variables);
  h.init_step = init_step;
  h.n_members = n_members;
  h.n_leads = n_leads;
  h.member_seeds.assign(n_members, 0);
  h.member_failed.assign(n_members, 0);
  const std::size_t per_var =
      static_cast<std::size_t>(n_leads + 1) * h.grid.npoints();
  h.values.assign(
      n_members,
      std::vector<std::vector<float>>(h.variables.size(),
                                      std::vector<float>(per_var, 0.0f)));
  return h;
}

int EnsembleHindcast::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("hindcast has no variable '" + name + "'");
}

void EnsembleHindcast::validate() const {
  grid.validate();
  if (static_cast<int>(values.size()) != n_members) {
    throw ConfigError("hindcast: member count mismatch");
  }
  const std::size_t per_var =
      static_cast<std::size_t>(n_leads + 1) * grid.npoints();
  for (const auto& member : values) {
    if (member.size() != variables.size()) {
      throw ConfigError("hindcast: variable count mismatch");
    }
    for (const auto& var : member) {
      if (var.size() != per_var) {
        throw ConfigError("hindcast: lead block size mismatch");
      }
    }
  }
}

void write_hindcast(const EnsembleHindcast& h,
                    const std::filesystem::path& dir) {
  h.validate();
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["init_step"] = h.init_step;
  manifest["n_members"] = h.n_members;
  manifest["n_leads"] = h.n_leads;
  manifest["member_seeds"] = h.member_seeds;
  manifest["config_hash"] = h.config_hash;
  std::vector<int> failed(h.member_failed.begin(), h.member_failed.end());
  manifest["member_failed"] = failed;
  std::ofstream out(dir / "ensemble.json");
  if (!out) throw ConfigError("cannot write ensemble manifest");
  out << manifest.dump(2) << "\n";

  for (int m = 0; m < h.n_members; ++m) {
    FieldArchive a = FieldArchive::create(
        h.grid, h.variables, TimeAxis{h.init_step, h.n_leads + 1});
    for (std::size_t v = 0; v < h.variables.size(); ++v) {
      a.values[v] = h.values[m][v];
    }
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03d", m);
    write_archive(a, dir / name);
  }
}

EnsembleHindcast load_hindcast(const std::filesystem::path& dir) {
  std::ifstream in(dir / "ensemble.json");
  if (!in) throw ConfigError("no ensemble.json in " + dir.string());
  json manifest;
  in >> manifest;
  if (manifest["format_version"].get<int>() != 1) {
    throw ConfigError("unknown ensemble format version");
  }
  const int n_members = manifest["n_members"].get<int>();
  const int n_leads = manifest["n_leads"].get<int>();
  const auto init_step = manifest["init_step"].get<std::int64_t>();

  EnsembleHindcast h;
  for (int m = 0; m < n_members; ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03d", m);
    FieldArchive a = load_archive(dir / name);
    if (m == 0) {
      h = EnsembleHindcast::create(a.grid, a.variables, init_step, n_members,
                                   n_leads);
    }
    if (a.times.start != init_step || a.times.count != n_leads + 1) {
      throw ConfigError("ensemble member time axis mismatch");
    }
    for (std::size_t v = 0; v < h.variables.size(); ++v) {
      h.values[m][v] = a.values[v];
    }
  }
  h.member_seeds = manifest["member_seeds"].get<std::vector<std::uint64_t>>();
  const auto failed = manifest["member_failed"].get<std::vector<int>>();
  h.member_failed.assign(failed.begin(), failed.end());
  h.config_hash = manifest["config_hash"].get<std::uint64_t>();
  h.validate();
  return h;
}

}  // namespace subcast

namespace subcast::ens {

std::string to_string(PerturbMode mode) {
  switch (mode) {
    case PerturbMode::none: return "none";
    case PerturbMode::ic: return "ic";
    case PerturbMode::model: return "model";
    case PerturbMode::both: return "both";
  }
  return "none";
}

PerturbMode perturb_mode_from_string(const std::string& s) {
  if (s == "none") return PerturbMode::none;
  if (s == "ic") return PerturbMode::ic;
  if (s == "model") return PerturbMode::model;
  if (s == "both") return PerturbMode::both;
  throw ConfigError("unknown perturbation mode '" + s + "'");
}

std::uint64_t PerturbationConfig::hash() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(mode) + 1);
  h = hash_combine(h, static_cast<std::uint64_t>(ic.amplitude * 1e9));
  h = hash_combine(h, static_cast<std::uint64_t>(ic.octaves));
  h = hash_combine(h, static_cast<std::uint64_t>(ic.base_wavelength * 1e6));
  h = hash_combine(h, static_cast<std::uint64_t>(ic.persistence * 1e9));
  h = hash_combine(h, ic.seed);
  for (std::uint8_t m : ic.mask) h = hash_combine(h, m);
  for (std::uint8_t m : model.switch_mask) h = hash_combine(h, 0x100 + m);
  h = hash_combine(h, model.seed_base);
  h = hash_combine(h, include_control_in_mean ? 1 : 0);
  return h;
}

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Unit gradient at an integer lattice node, hashed from (seed, octave, i, j).
void gradient(std::uint64_t seed, int octave, int i, int j, double& gx,
              double& gy) {
  const std::uint64_t h = mix64(
      hash_combine(seed, hash_combine(static_cast<std::uint64_t>(octave),
                                      hash_combine(static_cast<std::uint64_t>(
                                                       i + 0x10000),
                                                   static_cast<std::uint64_t>(
                                                       j + 0x10000)))));
  const double angle = kTwoPi * (static_cast<double>(h >> 11) * 0x1.0p-53);
  gx = std::cos(angle);
  gy = std::sin(angle);
}

}  // namespace

std::vector<double> perlin_field(int nlat, int nlon, const IcConfig& config,
                                 std::uint64_t seed) {
  if (nlat < 1 || nlon < 2) throw ConfigError("perlin_field: degenerate shape");
  if (config.octaves < 1) throw ConfigError("perlin_field: octaves < 1");
  if (!(config.persistence > 0.0) || config.persistence > 1.0) {
    throw ConfigError("perlin_field: persistence must be in (0, 1]");
  }
  if (config.base_wavelength < 1.0 ||
      config.base_wavelength > static_cast<double>(nlon)) {
    throw ConfigError("perlin_field: base wavelength must fit the grid");
  }

  std::vector<double> field(static_cast<std::size_t>(nlat) * nlon, 0.0);
  double amplitude = 1.0;
  for (int octave = 0; octave < config.octaves; ++octave) {
    const double wavelength =
        std::max(config.base_wavelength / std::pow(2.0, octave), 1.0);
    // Longitude lattice wraps: node count chosen so spacing divides the ring.
    const int lon_nodes =
        std::max(1, static_cast<int>(std::lround(nlon / wavelength)));
    const double lon_spacing = static_cast<double>(nlon) / lon_nodes;
    const double lat_spacing = wavelength;

    for (int i = 0; i < nlat; ++i) {
      const double u = i / lat_spacing;
      const int u0 = static_cast<int>(std::floor(u));
      const double uf = u - u0;
      const double su = fade(uf);
      for (int j = 0; j < nlon; ++j) {
        const double v = j / lon_spacing;
        const int v0 = static_cast<int>(std::floor(v));
        const double vf = v - v0;
        const double sv = fade(vf);

        double corners[2][2];
        for (int du = 0; du < 2; ++du) {
          for (int dv = 0; dv < 2; ++dv) {
            double gx, gy;
            gradient(hash_combine(seed, config.seed), octave, u0 + du,
                     (v0 + dv) % lon_nodes, gx, gy);
            corners[du][dv] = gx * (uf - du) + gy * (vf - dv);
          }
        }
        const double top = corners[0][0] + sv * (corners[0][1] - corners[0][0]);
        const double bot = corners[1][0] + sv * (corners[1][1] - corners[1][0]);
        field[static_cast<std::size_t>(i) * nlon + j] +=
            amplitude * (top + su * (bot - top));
      }
    }
    amplitude *= config.persistence;
  }

  double peak = 0.0;
  for (double v : field) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : field) v /= peak;
  }
  return field;
}

void perturb_ic(std::vector<std::vector<float>>& fields,
                const model::SurrogateModel& model, const IcConfig& config,
                std::uint64_t member_stream) {
  if (fields.size() != model.variables.size()) {
    throw ConfigError("perturb_ic: field count mismatch");
  }
  if (model.norm_std.size() != model.variables.size()) {
    throw ConfigError("perturb_ic: missing climatological sigma");
  }
  if (config.amplitude == 0.0) return;
  const int nlat = model.grid.nlat;
  const int nlon = model.grid.nlon;
  for (std::size_t v = 0; v < fields.size(); ++v) {
    if (!config.mask.empty() && !config.mask[v]) continue;
    const auto noise = perlin_field(
        nlat, nlon, config, hash_combine(member_stream, 0xf1e1d + v));
    const double scale = config.amplitude * model.norm_std[v];
    for (int p = 0; p < nlat * nlon; ++p) {
      fields[v][p] = static_cast<float>(fields[v][p] + scale * noise[p]);
    }
  }
}

EnsembleHindcast generate_members(const model::SurrogateModel& model,
                                  const std::vector<const float*>& snapshot,
                                  std::int64_t init_step, int n_members,
                                  int n_steps,
                                  const PerturbationConfig& config) {
  model.validate();
  if (n_members < 1) throw ConfigError("generate_members: need M >= 1");
  if (snapshot.size() != model.variables.size()) {
    throw ConfigError("generate_members: snapshot variable mismatch");
  }
  const bool use_ic =
      config.mode == PerturbMode::ic || config.mode == PerturbMode::both;
  const bool use_model =
      config.mode == PerturbMode::model || config.mode == PerturbMode::both;

  EnsembleHindcast h = EnsembleHindcast::create(
      model.grid, model.variables, init_step, n_members, n_steps);
  h.config_hash = config.hash();
  const int np = model.grid.npoints();

  model::SurrogateModel run_model = model;
  if (!config.model.switch_mask.empty()) {
    if (config.model.switch_mask.size() != model.variables.size()) {
      throw ConfigError("generate_members: switch mask length mismatch");
    }
    run_model.switch_mask = config.model.switch_mask;
  }

  for (int m = 0; m < n_members; ++m) {
    const std::uint64_t stream = derive_stream(config.model.seed_base, m);
    h.member_seeds[m] = stream;
    // Member 0 is always the unperturbed control.
    const bool perturb_this = m > 0;

    std::vector<std::vector<float>> fields(model.variables.size(),
                                           std::vector<float>(np));
    for (std::size_t v = 0; v < fields.size(); ++v) {
      std::copy(snapshot[v], snapshot[v] + np, fields[v].begin());
    }
    if (use_ic && perturb_this) {
      perturb_ic(fields, run_model, config.ic, hash_combine(stream, 0x1cULL));
    }
    for (std::size_t v = 0; v < fields.size(); ++v) {
      std::copy(fields[v].begin(), fields[v].end(),
                h.field(m, static_cast<int>(v), 0));
    }

    std::vector<const float*> ptrs(fields.size());
    for (std::size_t v = 0; v < fields.size(); ++v) ptrs[v] = fields[v].data();
    RngStream rng(derive_stream(stream, 0x0de1ULL));
    const auto result = model::rollout(
        run_model, ptrs, n_steps,
        (use_model && perturb_this && run_model.any_perturbable())
            ? model::Perturb::sample
            : model::Perturb::off,
        &rng);
    if (result.truncated) h.member_failed[m] = 1;
    for (int step = 0; step < result.valid_steps; ++step) {
      const std::vector<float>& flat = result.steps[step];
      for (std::size_t v = 0; v < fields.size(); ++v) {
        std::copy(flat.begin() + static_cast<std::size_t>(v) * np,
                  flat.begin() + static_cast<std::size_t>(v + 1) * np,
                  h.field(m, static_cast<int>(v), step + 1));
      }
    }
  }
  return h;
}

}  // namespace subcast::ens
