#include "subcast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "subcast/metrics.hpp"

namespace subcast::model {

using nlohmann::json;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::V1: return "V1";
    case Mode::AOL: return "AOL";
    case Mode::W2S: return "W2S";
  }
  return "W2S";
}

Mode mode_from_string(const std::string& s) {
  if (s == "V1") return Mode::V1;
  if (s == "AOL") return Mode::AOL;
  if (s == "W2S") return Mode::W2S;
  throw ConfigError("unknown architecture mode '" + s + "'");
}

Affine Affine::zeros(int in, int out) {
  Affine a;
  a.in = in;
  a.out = out;
  a.w.assign(static_cast<std::size_t>(in) * out, 0.0);
  a.b.assign(out, 0.0);
  return a;
}

void Affine::apply(const double* x, double* y) const {
  for (int o = 0; o < out; ++o) {
    const double* row = w.data() + static_cast<std::size_t>(o) * in;
    double acc = b[o];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

namespace {

// y += W^T d
void apply_transposed(const Affine& a, const double* d, double* y) {
  for (int o = 0; o < a.out; ++o) {
    const double* row = a.w.data() + static_cast<std::size_t>(o) * a.in;
    const double dv = d[o];
    for (int i = 0; i < a.in; ++i) y[i] += row[i] * dv;
  }
}

// gW += d (outer) x ; gb += d
void accumulate_affine_grads(const Affine& a, const double* d, const double* x,
                             double* gw, double* gb) {
  for (int o = 0; o < a.out; ++o) {
    double* grow = gw + static_cast<std::size_t>(o) * a.in;
    const double dv = d[o];
    for (int i = 0; i < a.in; ++i) grow[i] += dv * x[i];
    gb[o] += dv;
  }
}

void xavier_init(Affine& a, RngStream rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(a.in));
  for (double& w : a.w) w = scale * rng.normal();
  std::fill(a.b.begin(), a.b.end(), 0.0);
}

struct GroupSpec {
  std::string name;
  std::vector<std::string> vars;
  int width_slots;  // multiples of widths.encoder
};

std::vector<GroupSpec> mode_groups(Mode mode) {
  switch (mode) {
    case Mode::V1:
      return {{"atmos", {"z500a", "t2ma"}, 1}};
    case Mode::AOL:
      return {{"all", {"z500a", "t2ma", "ocean", "land", "precipa"}, 3}};
    case Mode::W2S:
      return {{"atmos", {"z500a", "t2ma"}, 1},
              {"ocean", {"ocean"}, 1},
              {"land", {"land", "precipa"}, 1}};
  }
  return {};
}

// Fixed serialization/visitation order shared by parameter flattening,
// checkpoints and backward accumulation.
template <typename ModelT, typename F>
void visit_affines(ModelT& m, F&& f) {
  for (auto& g : m.encoders) {
    f(g.name + ".map", g.map);
    f(g.name + ".pert.mu", g.pert.mu);
    f(g.name + ".pert.logvar", g.pert.logvar);
  }
  if (m.has_exchange) f("exchange", m.exchange);
  f("fuser", m.fuser);
  f("fuser.pert.mu", m.fuser_pert.mu);
  f("fuser.pert.logvar", m.fuser_pert.logvar);
  f("dec_mean", m.dec_mean);
  f("dec_logvar", m.dec_logvar);
}

struct BlockInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::vector<BlockInfo> param_layout(const SurrogateModel& m) {
  std::vector<BlockInfo> layout;
  std::size_t offset = 0;
  visit_affines(m, [&](const std::string& name, const Affine& a) {
    layout.push_back({name + ".w", offset, a.w.size()});
    offset += a.w.size();
    layout.push_back({name + ".b", offset, a.b.size()});
    offset += a.b.size();
  });
  return layout;
}

}  // namespace

int SurrogateModel::concat_width() const {
  int w = 0;
  for (const auto& g : encoders) w += g.map.out;
  return w;
}

int SurrogateModel::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("model has no variable '" + name + "'");
}

bool SurrogateModel::group_perturbable(int g) const {
  for (int v : encoders[g].var_index) {
    if (switch_mask[v]) return true;
  }
  return false;
}

bool SurrogateModel::any_perturbable() const {
  for (std::uint8_t m : switch_mask) {
    if (m) return true;
  }
  return false;
}

void SurrogateModel::validate() const {
  grid.validate();
  if (variables.empty()) throw ConfigError("model: no variables");
  if (switch_mask.size() != variables.size()) {
    throw ConfigError("model: switch mask length != variable count");
  }
  if (norm_mean.size() != variables.size() ||
      norm_std.size() != variables.size()) {
    throw ConfigError("model: missing standardization stats");
  }
  const int np = npoints();
  int covered = 0;
  for (const auto& g : encoders) {
    if (g.map.in != static_cast<int>(g.var_index.size()) * np) {
      throw ConfigError("model: encoder input width mismatch in " + g.name);
    }
    if (g.pert.mu.in != g.map.out || g.pert.mu.out != g.map.out ||
        g.pert.logvar.in != g.map.out || g.pert.logvar.out != g.map.out) {
      throw ConfigError("model: perturbation layer shape mismatch in " + g.name);
    }
    covered += static_cast<int>(g.var_index.size());
  }
  if (covered != nvars()) throw ConfigError("model: encoders do not cover variables");
  const int cw = concat_width();
  if (has_exchange && (exchange.in != cw || exchange.out != cw)) {
    throw ConfigError("model: exchange block shape mismatch");
  }
  if (fuser.in != cw) throw ConfigError("model: fuser input width mismatch");
  if (fuser_pert.mu.in != fuser.out || fuser_pert.logvar.in != fuser.out) {
    throw ConfigError("model: fuser perturbation shape mismatch");
  }
  if (dec_mean.in != fuser.out || dec_mean.out != state_size()) {
    throw ConfigError("model: decoder mean shape mismatch");
  }
  if (dec_logvar.in != fuser.out || dec_logvar.out != nvars()) {
    throw ConfigError("model: decoder logvar shape mismatch");
  }
}

std::vector<ParamBlock> param_blocks(SurrogateModel& model) {
  std::vector<ParamBlock> blocks;
  visit_affines(model, [&](const std::string& name, Affine& a) {
    blocks.push_back({name + ".w", a.w.data(), a.w.size()});
    blocks.push_back({name + ".b", a.b.data(), a.b.size()});
  });
  return blocks;
}

std::size_t param_count(const SurrogateModel& model) {
  std::size_t n = 0;
  visit_affines(model, [&](const std::string&, const Affine& a) {
    n += a.w.size() + a.b.size();
  });
  return n;
}

std::vector<double> params_to_flat(const SurrogateModel& model) {
  std::vector<double> flat;
  flat.reserve(param_count(model));
  visit_affines(model, [&](const std::string&, const Affine& a) {
    flat.insert(flat.end(), a.w.begin(), a.w.end());
    flat.insert(flat.end(), a.b.begin(), a.b.end());
  });
  return flat;
}

void params_from_flat(SurrogateModel& model, const std::vector<double>& flat) {
  if (flat.size() != param_count(model)) {
    throw ConfigError("parameter payload size mismatch");
  }
  std::size_t pos = 0;
  visit_affines(model, [&](const std::string&, Affine& a) {
    std::copy(flat.begin() + pos, flat.begin() + pos + a.w.size(), a.w.begin());
    pos += a.w.size();
    std::copy(flat.begin() + pos, flat.begin() + pos + a.b.size(), a.b.begin());
    pos += a.b.size();
  });
}

std::vector<std::string> mode_variables(Mode mode) {
  std::vector<std::string> vars;
  for (const auto& g : mode_groups(mode)) {
    vars.insert(vars.end(), g.vars.begin(), g.vars.end());
  }
  return vars;
}

SurrogateModel build_model(Mode mode, const Grid& grid, const Widths& widths,
                           std::uint64_t seed, bool residual_output) {
  SurrogateModel m;
  m.mode = mode;
  m.grid = grid;
  m.seed = seed;
  m.residual_output = residual_output;
  m.variables = mode_variables(mode);
  m.norm_mean.assign(m.variables.size(), 0.0);
  m.norm_std.assign(m.variables.size(), 1.0);
  // Default switch mask: model perturbation off for t2ma and ocean.
  m.switch_mask.assign(m.variables.size(), 1);
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    if (m.variables[v] == "t2ma" || m.variables[v] == "ocean") {
      m.switch_mask[v] = 0;
    }
  }

  const int np = grid.npoints();
  int var_offset = 0;
  std::uint64_t ordinal = 1;
  for (const auto& spec : mode_groups(mode)) {
    EncoderGroup g;
    g.name = spec.name;
    for (std::size_t k = 0; k < spec.vars.size(); ++k) {
      g.var_index.push_back(var_offset + static_cast<int>(k));
    }
    const int width = widths.encoder * spec.width_slots;
    g.map = Affine::zeros(static_cast<int>(spec.vars.size()) * np, width);
    xavier_init(g.map, RngStream(derive_stream(seed, ordinal++)));
    g.pert.mu = Affine::zeros(width, width);
    for (int i = 0; i < width; ++i) g.pert.mu.w[i * width + i] = 1.0;
    g.pert.logvar = Affine::zeros(width, width);
    std::fill(g.pert.logvar.b.begin(), g.pert.logvar.b.end(), -6.0);
    var_offset += static_cast<int>(spec.vars.size());
    m.encoders.push_back(std::move(g));
  }

  const int cw = m.concat_width();
  m.has_exchange = (mode == Mode::W2S);
  if (m.has_exchange) {
    // Residual mixing starts at zero: identical to the no-exchange path.
    m.exchange = Affine::zeros(cw, cw);
  }
  m.fuser = Affine::zeros(cw, widths.fuser);
  xavier_init(m.fuser, RngStream(derive_stream(seed, ordinal++)));
  m.fuser_pert.mu = Affine::zeros(widths.fuser, widths.fuser);
  for (int i = 0; i < widths.fuser; ++i) {
    m.fuser_pert.mu.w[i * widths.fuser + i] = 1.0;
  }
  m.fuser_pert.logvar = Affine::zeros(widths.fuser, widths.fuser);
  std::fill(m.fuser_pert.logvar.b.begin(), m.fuser_pert.logvar.b.end(), -6.0);
  // The mean head starts at zero: with the residual passthrough the initial
  // model is persistence and training only has to learn the increment.
  m.dec_mean = Affine::zeros(widths.fuser, m.state_size());
  if (!residual_output) {
    xavier_init(m.dec_mean, RngStream(derive_stream(seed, ordinal)));
  }
  ++ordinal;
  m.dec_logvar = Affine::zeros(widths.fuser, m.nvars());
  m.validate();
  return m;
}

namespace {

void perturb_layer_forward(const PerturbLayer& pl, ForwardCache::Layer& layer,
                           RngStream* rng, const std::vector<double>* fixed_eps) {
  const int d = pl.mu.out;
  layer.mu.resize(d);
  layer.logvar.resize(d);
  layer.eps.resize(d);
  layer.out.resize(d);
  pl.mu.apply(layer.act.data(), layer.mu.data());
  pl.logvar.apply(layer.act.data(), layer.logvar.data());
  for (int i = 0; i < d; ++i) {
    layer.logvar[i] = std::clamp(layer.logvar[i], -kLogVarClamp, kLogVarClamp);
  }
  if (fixed_eps != nullptr) {
    if (static_cast<int>(fixed_eps->size()) != d) {
      throw ConfigError("fixed noise draw has wrong length");
    }
    layer.eps = *fixed_eps;
  } else {
    if (rng == nullptr) {
      throw ConfigError("sampled forward pass needs an rng stream");
    }
    for (int i = 0; i < d; ++i) layer.eps[i] = rng->normal();
  }
  for (int i = 0; i < d; ++i) {
    layer.out[i] = layer.mu[i] + std::exp(0.5 * layer.logvar[i]) * layer.eps[i];
  }
  layer.sampled = true;
}

}  // namespace

void forward(const SurrogateModel& model, const std::vector<double>& state,
             Perturb perturb, RngStream* rng, ForwardCache& cache,
             const NoiseDraws* noise) {
  const int np = model.npoints();
  if (static_cast<int>(state.size()) != model.state_size()) {
    throw ConfigError("forward: state dimension mismatch (" +
                      std::to_string(state.size()) + " vs " +
                      std::to_string(model.state_size()) + ")");
  }

  cache.enc.assign(model.encoders.size(), {});
  const int cw = model.concat_width();
  cache.concat.assign(cw, 0.0);
  int concat_pos = 0;
  for (std::size_t g = 0; g < model.encoders.size(); ++g) {
    const auto& enc = model.encoders[g];
    auto& layer = cache.enc[g];
    layer.input.resize(enc.map.in);
    int pos = 0;
    for (int v : enc.var_index) {
      std::copy(state.begin() + static_cast<std::size_t>(v) * np,
                state.begin() + static_cast<std::size_t>(v + 1) * np,
                layer.input.begin() + pos);
      pos += np;
    }
    layer.pre.resize(enc.map.out);
    enc.map.apply(layer.input.data(), layer.pre.data());
    layer.act.resize(enc.map.out);
    for (int i = 0; i < enc.map.out; ++i) layer.act[i] = std::tanh(layer.pre[i]);

    const double* out_ptr = layer.act.data();
    if (perturb == Perturb::sample &&
        model.group_perturbable(static_cast<int>(g))) {
      perturb_layer_forward(enc.pert, layer, rng,
                            noise != nullptr ? &noise->enc_eps.at(g) : nullptr);
      out_ptr = layer.out.data();
    }
    std::copy(out_ptr, out_ptr + enc.map.out, cache.concat.begin() + concat_pos);
    concat_pos += enc.map.out;
  }

  if (model.has_exchange) {
    cache.exchanged.resize(cw);
    model.exchange.apply(cache.concat.data(), cache.exchanged.data());
    for (int i = 0; i < cw; ++i) cache.exchanged[i] += cache.concat[i];
  } else {
    cache.exchanged = cache.concat;
  }

  cache.fuser = {};
  cache.fuser.input = cache.exchanged;
  cache.fuser.pre.resize(model.fuser.out);
  model.fuser.apply(cache.fuser.input.data(), cache.fuser.pre.data());
  cache.fuser.act.resize(model.fuser.out);
  for (int i = 0; i < model.fuser.out; ++i) {
    cache.fuser.act[i] = std::tanh(cache.fuser.pre[i]);
  }
  const double* fuser_out = cache.fuser.act.data();
  if (perturb == Perturb::sample && model.any_perturbable()) {
    perturb_layer_forward(model.fuser_pert, cache.fuser, rng,
                          noise != nullptr ? &noise->fuser_eps : nullptr);
    fuser_out = cache.fuser.out.data();
  }

  cache.mean.resize(model.state_size());
  model.dec_mean.apply(fuser_out, cache.mean.data());
  if (model.residual_output) {
    for (int e = 0; e < model.state_size(); ++e) cache.mean[e] += state[e];
  }
  cache.logvar_raw.resize(model.nvars());
  model.dec_logvar.apply(fuser_out, cache.logvar_raw.data());
  cache.logvar.resize(model.nvars());
  for (int v = 0; v < model.nvars(); ++v) {
    cache.logvar[v] = std::clamp(cache.logvar_raw[v], -kLogVarClamp,
                                 kLogVarClamp);
  }
}

double p_loss(const std::vector<double>& mean,
              const std::vector<double>& logvar_per_var,
              const std::vector<double>& truth, int npoints) {
  if (mean.size() != truth.size() ||
      mean.size() != logvar_per_var.size() * npoints) {
    throw ConfigError("p_loss: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t v = 0; v < logvar_per_var.size(); ++v) {
    const double lv = logvar_per_var[v];
    if (!std::isfinite(lv)) throw NumericalError("p_loss: non-finite logvar");
    const double inv_var = std::exp(-lv);
    for (int p = 0; p < npoints; ++p) {
      const std::size_t e = v * npoints + p;
      const double r = mean[e] - truth[e];
      if (!std::isfinite(r)) throw NumericalError("p_loss: non-finite input");
      acc += 0.5 * (r * r * inv_var + lv);
    }
  }
  return acc / static_cast<double>(mean.size());
}

double mse_loss(const std::vector<double>& mean,
                const std::vector<double>& truth) {
  if (mean.size() != truth.size()) throw ConfigError("mse_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t e = 0; e < mean.size(); ++e) {
    const double r = mean[e] - truth[e];
    acc += 0.5 * r * r;
  }
  return acc / static_cast<double>(mean.size());
}

double kl_loss(const std::vector<double>& mu,
               const std::vector<double>& logvar) {
  if (mu.size() != logvar.size()) throw ConfigError("kl_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(logvar[i])) {
      throw NumericalError("kl_loss: non-finite input");
    }
    acc += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - logvar[i] - 1.0);
  }
  return acc;
}

LossBreakdown evaluate_loss(const SurrogateModel& model,
                            const ForwardCache& cache,
                            const std::vector<double>& truth,
                            const LossConfig& cfg) {
  LossBreakdown out;
  out.p = cfg.mse ? mse_loss(cache.mean, truth)
                  : p_loss(cache.mean, cache.logvar, truth, model.npoints());
  if (cfg.include_kl) {
    for (const auto& layer : cache.enc) {
      if (layer.sampled) out.kl_terms.push_back(kl_loss(layer.mu, layer.logvar));
    }
    if (cache.fuser.sampled) {
      out.kl_terms.push_back(kl_loss(cache.fuser.mu, cache.fuser.logvar));
    }
  }
  out.total = out.p + cfg.kl_weight * out.kl_sum();
  return out;
}

namespace {

// Backward through one perturbation layer (or pass-through). d_out holds the
// gradient on the layer's output; returns the gradient on the tanh output.
std::vector<double> perturb_layer_backward(
    const PerturbLayer& pl, const ForwardCache::Layer& layer,
    const std::vector<double>& d_out, double lambda, bool include_kl,
    double* g_mu_w, double* g_mu_b, double* g_lv_w, double* g_lv_b) {
  if (!layer.sampled) return d_out;
  const int d = pl.mu.out;
  std::vector<double> d_mu(d), d_lv(d);
  for (int i = 0; i < d; ++i) {
    const double sigma = std::exp(0.5 * layer.logvar[i]);
    d_mu[i] = d_out[i];
    d_lv[i] = d_out[i] * layer.eps[i] * 0.5 * sigma;
    if (include_kl) {
      d_mu[i] += lambda * layer.mu[i];
      d_lv[i] += lambda * 0.5 * (std::exp(layer.logvar[i]) - 1.0);
    }
    // Clamp subgradient: no flow where the raw logvar was clipped.
    if (std::abs(layer.logvar[i]) >= kLogVarClamp) d_lv[i] = 0.0;
  }
  accumulate_affine_grads(pl.mu, d_mu.data(), layer.act.data(), g_mu_w, g_mu_b);
  accumulate_affine_grads(pl.logvar, d_lv.data(), layer.act.data(), g_lv_w,
                          g_lv_b);
  std::vector<double> d_act(d, 0.0);
  apply_transposed(pl.mu, d_mu.data(), d_act.data());
  apply_transposed(pl.logvar, d_lv.data(), d_act.data());
  return d_act;
}

}  // namespace

void backward(const SurrogateModel& model, const ForwardCache& cache,
              const std::vector<double>& truth, const LossConfig& cfg,
              std::vector<double>& grads) {
  const auto layout = param_layout(model);
  std::size_t total = 0;
  for (const auto& b : layout) total += b.size;
  if (grads.size() != total) {
    throw ConfigError("backward: gradient buffer size mismatch");
  }
  auto block = [&](const std::string& name) -> double* {
    for (const auto& b : layout) {
      if (b.name == name) return grads.data() + b.offset;
    }
    throw ConfigError("backward: unknown block " + name);
  };

  const int np = model.npoints();
  const int nv = model.nvars();
  const auto n_elems = static_cast<double>(model.state_size());

  // Loss head.
  std::vector<double> d_mean(model.state_size());
  std::vector<double> d_logvar_raw(nv, 0.0);
  if (cfg.mse) {
    for (int e = 0; e < model.state_size(); ++e) {
      d_mean[e] = (cache.mean[e] - truth[e]) / n_elems;
    }
  } else {
    for (int v = 0; v < nv; ++v) {
      const double lv = cache.logvar[v];
      const double inv_var = std::exp(-lv);
      double dlv = 0.0;
      for (int p = 0; p < np; ++p) {
        const int e = v * np + p;
        const double r = cache.mean[e] - truth[e];
        d_mean[e] = r * inv_var / n_elems;
        dlv += 0.5 * (1.0 - r * r * inv_var) / n_elems;
      }
      if (std::abs(cache.logvar_raw[v]) < kLogVarClamp) d_logvar_raw[v] = dlv;
    }
  }

  const std::vector<double>& fuser_out =
      cache.fuser.sampled ? cache.fuser.out : cache.fuser.act;
  accumulate_affine_grads(model.dec_mean, d_mean.data(), fuser_out.data(),
                          block("dec_mean.w"), block("dec_mean.b"));
  accumulate_affine_grads(model.dec_logvar, d_logvar_raw.data(),
                          fuser_out.data(), block("dec_logvar.w"),
                          block("dec_logvar.b"));
  std::vector<double> d_fuser_out(model.fuser.out, 0.0);
  apply_transposed(model.dec_mean, d_mean.data(), d_fuser_out.data());
  apply_transposed(model.dec_logvar, d_logvar_raw.data(), d_fuser_out.data());

  const std::vector<double> d_fuser_act = perturb_layer_backward(
      model.fuser_pert, cache.fuser, d_fuser_out, cfg.kl_weight, cfg.include_kl,
      block("fuser.pert.mu.w"), block("fuser.pert.mu.b"),
      block("fuser.pert.logvar.w"), block("fuser.pert.logvar.b"));

  std::vector<double> d_fuser_pre(model.fuser.out);
  for (int i = 0; i < model.fuser.out; ++i) {
    d_fuser_pre[i] = d_fuser_act[i] * (1.0 - cache.fuser.act[i] * cache.fuser.act[i]);
  }
  accumulate_affine_grads(model.fuser, d_fuser_pre.data(),
                          cache.fuser.input.data(), block("fuser.w"),
                          block("fuser.b"));
  const int cw = model.concat_width();
  std::vector<double> d_exchanged(cw, 0.0);
  apply_transposed(model.fuser, d_fuser_pre.data(), d_exchanged.data());

  std::vector<double> d_concat = d_exchanged;
  if (model.has_exchange) {
    accumulate_affine_grads(model.exchange, d_exchanged.data(),
                            cache.concat.data(), block("exchange.w"),
                            block("exchange.b"));
    apply_transposed(model.exchange, d_exchanged.data(), d_concat.data());
  }

  int concat_pos = 0;
  for (std::size_t g = 0; g < model.encoders.size(); ++g) {
    const auto& enc = model.encoders[g];
    const auto& layer = cache.enc[g];
    std::vector<double> d_out(d_concat.begin() + concat_pos,
                              d_concat.begin() + concat_pos + enc.map.out);
    concat_pos += enc.map.out;
    const std::vector<double> d_act = perturb_layer_backward(
        enc.pert, layer, d_out, cfg.kl_weight, cfg.include_kl,
        block(enc.name + ".pert.mu.w"), block(enc.name + ".pert.mu.b"),
        block(enc.name + ".pert.logvar.w"), block(enc.name + ".pert.logvar.b"));
    std::vector<double> d_pre(enc.map.out);
    for (int i = 0; i < enc.map.out; ++i) {
      d_pre[i] = d_act[i] * (1.0 - layer.act[i] * layer.act[i]);
    }
    accumulate_affine_grads(enc.map, d_pre.data(), layer.input.data(),
                            block(enc.name + ".map.w"),
                            block(enc.name + ".map.b"));
  }

  for (const auto& b : layout) {
    const double* g = grads.data() + b.offset;
    for (std::size_t i = 0; i < b.size; ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericalError("non-finite gradient in layer " + b.name);
      }
    }
  }
}

std::vector<double> standardize(const SurrogateModel& model,
                                const std::vector<const float*>& fields) {
  if (fields.size() != model.variables.size()) {
    throw ConfigError("standardize: field count mismatch");
  }
  const int np = model.npoints();
  std::vector<double> state(model.state_size());
  for (int v = 0; v < model.nvars(); ++v) {
    const double mean = model.norm_mean[v];
    const double sd = model.norm_std[v];
    for (int p = 0; p < np; ++p) {
      state[static_cast<std::size_t>(v) * np + p] = (fields[v][p] - mean) / sd;
    }
  }
  return state;
}

void destandardize(const SurrogateModel& model, const std::vector<double>& state,
                   std::vector<std::vector<float>>& fields) {
  const int np = model.npoints();
  fields.assign(model.nvars(), std::vector<float>(np));
  for (int v = 0; v < model.nvars(); ++v) {
    const double mean = model.norm_mean[v];
    const double sd = model.norm_std[v];
    for (int p = 0; p < np; ++p) {
      fields[v][p] = static_cast<float>(
          state[static_cast<std::size_t>(v) * np + p] * sd + mean);
    }
  }
}

namespace {

struct AdamW {
  std::vector<double> m, v;
  long step = 0;

  explicit AdamW(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void update(std::vector<double>& params, const std::vector<double>& grads,
              double lr, double beta1, double beta2, double weight_decay) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
      params[i] -= lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8) +
                         weight_decay * params[i]);
    }
  }
};

}  // namespace

TrainResult train(const FieldArchive& truth, const TrainConfig& cfg) {
  truth.validate();
  const std::int64_t split_start =
      to_step({cfg.train_year_start, 0, 0});
  const std::int64_t split_end = to_step({cfg.train_year_end + 1, 0, 0});
  if (split_start < truth.times.start || split_end > truth.times.end()) {
    throw ConfigError("training split not covered by truth archive");
  }
  const std::int64_t n_steps = split_end - split_start;
  if (n_steps < 2) throw ConfigError("training split too short for pairs");

  TrainResult result;
  result.model = build_model(cfg.mode, truth.grid, cfg.widths, cfg.seed,
                             cfg.residual_output);
  SurrogateModel& model = result.model;
  const int np = model.npoints();
  const int nv = model.nvars();

  // Standardization statistics over the training split.
  std::vector<int> truth_var(nv);
  for (int v = 0; v < nv; ++v) {
    truth_var[v] = truth.var_index(model.variables[v]);
  }
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0, sq = 0.0;
    for (std::int64_t t = 0; t < n_steps; ++t) {
      const float* f =
          truth.field(truth_var[v], truth.times.index_of(split_start + t));
      for (int p = 0; p < np; ++p) {
        sum += f[p];
        sq += static_cast<double>(f[p]) * f[p];
      }
    }
    const double n = static_cast<double>(n_steps) * np;
    model.norm_mean[v] = sum / n;
    const double var = sq / n - model.norm_mean[v] * model.norm_mean[v];
    model.norm_std[v] = std::sqrt(std::max(var, 1e-12));
  }

  // Standardized state matrix for the split.
  std::vector<double> states(static_cast<std::size_t>(n_steps) *
                             model.state_size());
  for (std::int64_t t = 0; t < n_steps; ++t) {
    std::vector<const float*> fields(nv);
    for (int v = 0; v < nv; ++v) {
      fields[v] = truth.field(truth_var[v], truth.times.index_of(split_start + t));
    }
    const auto state = standardize(model, fields);
    std::copy(state.begin(), state.end(),
              states.begin() + t * model.state_size());
  }

  const std::size_t nparams = param_count(model);
  std::vector<double> flat = params_to_flat(model);
  AdamW adam(nparams);
  std::vector<double> grads(nparams), batch_grads(nparams);
  ForwardCache cache;
  std::vector<double> sample_truth(model.state_size());

  const auto n_pairs = static_cast<std::size_t>(n_steps - 1);
  std::vector<std::size_t> order(n_pairs);

  auto run_stage = [&](int stage, int epochs) {
    const bool stage2 = stage == 2;
    LossConfig loss_cfg;
    loss_cfg.kl_weight = cfg.kl_weight;
    loss_cfg.include_kl = stage2;
    loss_cfg.mse = cfg.mse_loss;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      RngStream shuffler(derive_stream(
          cfg.seed, hash_combine(stage * 1000 + epoch, 0x0dfeedULL)));
      for (std::size_t i = n_pairs; i > 1; --i) {
        const std::size_t j = shuffler.next_u64() % i;
        std::swap(order[i - 1], order[j]);
      }
      double epoch_total = 0.0, epoch_p = 0.0, epoch_kl = 0.0;
      std::size_t batch_index = 0;
      for (std::size_t pos = 0; pos < n_pairs; pos += cfg.batch_size) {
        const std::size_t batch_n =
            std::min<std::size_t>(cfg.batch_size, n_pairs - pos);
        std::fill(batch_grads.begin(), batch_grads.end(), 0.0);
        RngStream noise(derive_stream(
            cfg.seed,
            hash_combine(stage * 1000000 + epoch * 1000 + batch_index,
                         0xa0153ULL)));
        for (std::size_t k = 0; k < batch_n; ++k) {
          const std::size_t pair = order[pos + k];
          const double* x = states.data() + pair * model.state_size();
          const double* y = states.data() + (pair + 1) * model.state_size();
          std::vector<double> input(x, x + model.state_size());
          if (cfg.input_noise > 0.0) {
            for (double& v : input) v += cfg.input_noise * noise.normal();
          }
          std::copy(y, y + model.state_size(), sample_truth.begin());
          forward(model, input, stage2 ? Perturb::sample : Perturb::off,
                  &noise, cache);
          const LossBreakdown loss =
              evaluate_loss(model, cache, sample_truth, loss_cfg);
          epoch_total += loss.total;
          epoch_p += loss.p;
          epoch_kl += loss.kl_sum();
          std::fill(grads.begin(), grads.end(), 0.0);
          backward(model, cache, sample_truth, loss_cfg, grads);
          for (std::size_t i = 0; i < nparams; ++i) batch_grads[i] += grads[i];
        }
        for (std::size_t i = 0; i < nparams; ++i) {
          batch_grads[i] /= static_cast<double>(batch_n);
        }
        adam.update(flat, batch_grads, cfg.learning_rate, cfg.beta1, cfg.beta2,
                    cfg.weight_decay);
        params_from_flat(model, flat);
        ++batch_index;
      }
      LossRecord rec;
      rec.stage = stage;
      rec.epoch = epoch;
      rec.total = epoch_total / static_cast<double>(n_pairs);
      rec.p = epoch_p / static_cast<double>(n_pairs);
      rec.kl = epoch_kl / static_cast<double>(n_pairs);
      result.history.push_back(rec);
      if (!std::isfinite(rec.total)) {
        result.diverged = true;
        return;
      }
    }
  };

  run_stage(1, cfg.stage1_epochs);
  if (!result.diverged) run_stage(2, cfg.stage2_epochs);
  return result;
}

RolloutResult rollout(const SurrogateModel& model,
                      const std::vector<const float*>& initial_fields,
                      int n_steps, Perturb perturb, RngStream* rng) {
  if (n_steps < 1) throw ConfigError("rollout: n_steps must be >= 1");
  RolloutResult out;
  std::vector<double> state = standardize(model, initial_fields);
  ForwardCache cache;
  std::vector<std::vector<float>> fields;
  for (int step = 0; step < n_steps; ++step) {
    forward(model, state, perturb, rng, cache);
    bool finite = true;
    for (double v : cache.mean) {
      if (!std::isfinite(v) || std::abs(v) > 1e6) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      out.truncated = true;
      break;
    }
    state = cache.mean;
    destandardize(model, state, fields);
    std::vector<float> flat;
    flat.reserve(state.size());
    for (const auto& f : fields) flat.insert(flat.end(), f.begin(), f.end());
    out.steps.push_back(std::move(flat));
  }
  out.valid_steps = static_cast<int>(out.steps.size());
  return out;
}

void write_loss_history(const std::vector<LossRecord>& history,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "stage,epoch,total,p_loss,kl_sum\n";
  for (const auto& rec : history) {
    out << rec.stage << ',' << rec.epoch << ','
        << metrics::format_double(rec.total) << ','
        << metrics::format_double(rec.p) << ','
        << metrics::format_double(rec.kl) << "\n";
  }
}

void save_model(const SurrogateModel& model, const std::filesystem::path& dir) {
  model.validate();
  std::filesystem::create_directories(dir);
  json header;
  header["format_version"] = 1;
  header["mode"] = to_string(model.mode);
  header["variables"] = model.variables;
  header["grid"] = {{"lat", model.grid.lat}, {"lon", model.grid.lon}};
  header["widths"] = {{"encoder", model.encoders.front().map.out /
                                      static_cast<int>(mode_groups(model.mode)
                                                           .front()
                                                           .width_slots)},
                      {"fuser", model.fuser.out}};
  header["norm_mean"] = model.norm_mean;
  header["norm_std"] = model.norm_std;
  std::vector<int> mask(model.switch_mask.begin(), model.switch_mask.end());
  header["switch_mask"] = mask;
  header["seed"] = model.seed;
  header["residual_output"] = model.residual_output;
  header["param_count"] = param_count(model);
  std::ofstream hout(dir / "model.json");
  if (!hout) throw ConfigError("cannot write model header");
  hout << header.dump(2) << "\n";

  const auto flat = params_to_flat(model);
  std::ofstream pout(dir / "params.f64", std::ios::binary);
  if (!pout) throw ConfigError("cannot write model payload");
  pout.write(reinterpret_cast<const char*>(flat.data()),
             static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

SurrogateModel load_model(const std::filesystem::path& dir) {
  std::ifstream hin(dir / "model.json");
  if (!hin) throw ConfigError("no model.json in " + dir.string());
  json header;
  hin >> header;
  if (header["format_version"].get<int>() != 1) {
    throw ConfigError("unknown checkpoint format version");
  }
  Grid grid = Grid::regular(header["grid"]["lat"].get<std::vector<double>>(),
                            header["grid"]["lon"].get<std::vector<double>>());
  Widths widths;
  widths.encoder = header["widths"]["encoder"].get<int>();
  widths.fuser = header["widths"]["fuser"].get<int>();
  SurrogateModel model =
      build_model(mode_from_string(header["mode"].get<std::string>()), grid,
                  widths, header["seed"].get<std::uint64_t>(),
                  header["residual_output"].get<bool>());
  if (model.variables != header["variables"].get<std::vector<std::string>>()) {
    throw ConfigError("checkpoint variable list mismatch");
  }
  model.norm_mean = header["norm_mean"].get<std::vector<double>>();
  model.norm_std = header["norm_std"].get<std::vector<double>>();
  const auto mask = header["switch_mask"].get<std::vector<int>>();
  model.switch_mask.assign(mask.begin(), mask.end());

  const std::size_t n = header["param_count"].get<std::size_t>();
  if (n != param_count(model)) {
    throw ConfigError("checkpoint parameter count mismatch");
  }
  std::ifstream pin(dir / "params.f64", std::ios::binary | std::ios::ate);
  if (!pin) throw ConfigError("no params.f64 in " + dir.string());
  if (static_cast<std::size_t>(pin.tellg()) != n * sizeof(double)) {
    throw ConfigError("checkpoint payload size mismatch");
  }
  std::vector<double> flat(n);
  pin.seekg(0);
  pin.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
  params_from_flat(model, flat);
  model.validate();
  return model;
}

}  // namespace subcast::model
