#include <cmath>

#include "doctest.h"
#include "subcast/toyearth.hpp"

using namespace subcast;
using namespace subcast::toy;

namespace {

ToyParams small_params() {
  ToyParams p;
  p.sites = 8;
  p.fast_per_site = 4;
  p.rings = 2;
  p.ring_lats = {-30.0, 30.0};
  p.forcing = {8.0, 8.0};
  return p;
}

// Independent single-scale tendency for the uncoupled limit (h = gamma = 0):
// the classical ring equation dX_k = -X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F.
double classic_ring(const std::vector<double>& x, int k, double forcing) {
  const int n = static_cast<int>(x.size());
  const int km1 = (k - 1 + n) % n;
  const int km2 = (k - 2 + n) % n;
  const int kp1 = (k + 1) % n;
  return -x[km1] * (x[km2] - x[kp1]) - x[k] + forcing;
}

}  // namespace

TEST_CASE("tendency") {
  SUBCASE("rest state with zero forcing is a fixed point") {
    ToyParams p = small_params();
    p.forcing = {0.0, 0.0};
    const ToyState s = ToyState::zeros(p);
    const ToyState d = tendency(s, p);
    for (double v : d.x) CHECK(v == 0.0);
    for (double v : d.y) CHECK(v == 0.0);
    for (double v : d.ocean) CHECK(v == 0.0);
    for (double v : d.land) CHECK(v == 0.0);
  }

  SUBCASE("uncoupled limit matches the independent ring oracle") {
    ToyParams p = small_params();
    p.coupling_h = 0.0;
    p.ocean_gain = 0.0;
    ToyState s = initial_state(p, 7);
    const ToyState d = tendency(s, p);
    for (int r = 0; r < p.rings; ++r) {
      std::vector<double> ring(s.x.begin() + r * p.sites,
                               s.x.begin() + (r + 1) * p.sites);
      for (int k = 0; k < p.sites; ++k) {
        CHECK(d.x[r * p.sites + k] ==
              doctest::Approx(classic_ring(ring, k, p.forcing[r]))
                  .epsilon(1e-12));
      }
    }
  }

  SUBCASE("advection terms cancel: d(sum X^2/2)/dt = -sum X^2 when F=h=gamma=0") {
    ToyParams p = small_params();
    p.coupling_h = 0.0;
    p.ocean_gain = 0.0;
    p.forcing = {0.0, 0.0};
    ToyState s = initial_state(p, 11);
    std::fill(s.y.begin(), s.y.end(), 0.0);
    const ToyState d = tendency(s, p);
    double lhs = 0.0, energy = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      lhs += s.x[i] * d.x[i];
      energy += s.x[i] * s.x[i];
    }
    CHECK(lhs == doctest::Approx(-energy).epsilon(1e-10));
  }

  SUBCASE("shape mismatch is rejected") {
    ToyParams p = small_params();
    ToyParams q = small_params();
    q.sites = 12;
    const ToyState s = ToyState::zeros(p);
    CHECK_THROWS_AS(tendency(s, q), ConfigError);
  }
}

TEST_CASE("rk4 stepping") {
  SUBCASE("fixed point stays fixed") {
    ToyParams p = small_params();
    p.forcing = {0.0, 0.0};
    const ToyState s = ToyState::zeros(p);
    const ToyState next = step_rk4(s, p);
    for (double v : next.x) CHECK(v == 0.0);
    for (double v : next.ocean) CHECK(v == 0.0);
  }

  SUBCASE("observed convergence order is at least 4") {
    // Richardson estimate on a smooth stretch: compare one dt step against
    // two dt/2 steps across several dt values.
    ToyParams p = small_params();
    ToyState s = initial_state(p, 3);
    for (int k = 0; k < 200; ++k) s = step_rk4(s, p);  // settle on attractor

    auto error_at = [&](double dt) {
      ToyParams pa = p;
      pa.dt = dt;
      ToyParams pb = p;
      pb.dt = dt / 2.0;
      const ToyState one = step_rk4(s, pa);
      const ToyState two = step_rk4(step_rk4(s, pb), pb);
      double err = 0.0;
      for (std::size_t i = 0; i < one.x.size(); ++i) {
        err = std::max(err, std::abs(one.x[i] - two.x[i]));
      }
      for (std::size_t i = 0; i < one.y.size(); ++i) {
        err = std::max(err, std::abs(one.y[i] - two.y[i]));
      }
      return err;
    };
    const double e1 = error_at(0.004);
    const double e2 = error_at(0.002);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 4.0);
    CHECK(order >= 4.5);  // one-step Richardson reflects the local order ~5
  }

  SUBCASE("same state and params give bit-identical trajectories") {
    ToyParams p = small_params();
    ToyState a = initial_state(p, 5);
    ToyState b = initial_state(p, 5);
    for (int k = 0; k < 50; ++k) {
      a = step_rk4(a, p);
      b = step_rk4(b, p);
    }
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.ocean == b.ocean);
    CHECK(a.land == b.land);
  }

  SUBCASE("blow-up raises a numerical error") {
    ToyParams p = small_params();
    ToyState s = ToyState::zeros(p);
    s.x[0] = 9e5;
    s.x[1] = -9e5;
    CHECK_THROWS_AS(
        [&] {
          for (int k = 0; k < 200; ++k) s = step_rk4(s, p);
        }(),
        NumericalError);
  }
}

TEST_CASE("observe") {
  ToyParams p = small_params();

  SUBCASE("huge precip threshold: no rain, flat outgoing radiation") {
    ToyParams q = p;
    q.precip_threshold = 1e9;
    ToyState s = initial_state(q, 13);
    std::vector<std::vector<float>> fields;
    observe(s, q, fields);
    const auto& vars = truth_variables();
    const int precip_idx = 2, olr_idx = 3;
    REQUIRE(vars[precip_idx] == "precipa");
    REQUIRE(vars[olr_idx] == "olra");
    for (float v : fields[precip_idx]) CHECK(v == 0.0f);
    for (float v : fields[olr_idx]) CHECK(v == 2.0f);
  }

  SUBCASE("zero ocean and land: t2m analog equals z500 analog") {
    ToyState s = initial_state(p, 17);
    std::fill(s.ocean.begin(), s.ocean.end(), 0.0);
    std::fill(s.land.begin(), s.land.end(), 0.0);
    std::vector<std::vector<float>> fields;
    observe(s, p, fields);
    for (std::size_t i = 0; i < fields[0].size(); ++i) {
      CHECK(fields[1][i] == fields[0][i]);
    }
  }

  SUBCASE("known state: all analogs follow the stated formulas elementwise") {
    ToyState s = ToyState::zeros(p);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      s.x[i] = 0.1 * static_cast<double>(i) - 0.3;
      s.ocean[i] = 0.2 + 0.01 * static_cast<double>(i);
      s.land[i] = 0.05 * static_cast<double>(i % 3);
    }
    std::vector<std::vector<float>> fields;
    observe(s, p, fields);
    const Grid grid = make_grid(p);
    // ring_lats are {-30, 30}: state ring 0 is grid row 0, ring 1 is row 1.
    for (int r = 0; r < p.rings; ++r) {
      for (int k = 0; k < p.sites; ++k) {
        const std::size_t si = static_cast<std::size_t>(r) * p.sites + k;
        const int gp = grid.point(r, k);
        const double x = s.x[si], o = s.ocean[si], l = s.land[si];
        const double precip = std::max(0.0, x - p.precip_threshold);
        CHECK(fields[0][gp] == doctest::Approx(x));
        CHECK(fields[1][gp] == doctest::Approx(x + 0.5 * o + 0.25 * l));
        CHECK(fields[2][gp] == doctest::Approx(precip));
        CHECK(fields[3][gp] == doctest::Approx(2.0 - precip));
        CHECK(fields[4][gp] == doctest::Approx(o));
        CHECK(fields[5][gp] == doctest::Approx(l));
      }
    }
  }
}

TEST_CASE("gen_truth") {
  ToyParams p = small_params();

  SUBCASE("same seed reproduces the archive exactly") {
    const FieldArchive a = gen_truth(p, 1, 42);
    const FieldArchive b = gen_truth(p, 1, 42);
    for (std::size_t v = 0; v < a.values.size(); ++v) {
      CHECK(a.values[v] == b.values[v]);
    }
  }

  SUBCASE("different seeds decorrelate after spin-up") {
    const FieldArchive a = gen_truth(p, 1, 1);
    const FieldArchive b = gen_truth(p, 1, 2);
    // Correlation of the slow field over the year at a few points.
    const int var = 0;
    double worst = 0.0;
    for (int point : {0, 5, 9}) {
      double ab = 0.0, aa = 0.0, bb = 0.0, ma = 0.0, mb = 0.0;
      const auto n = static_cast<double>(a.times.count);
      for (std::int64_t t = 0; t < a.times.count; ++t) {
        ma += a.field(var, t)[point];
        mb += b.field(var, t)[point];
      }
      ma /= n;
      mb /= n;
      for (std::int64_t t = 0; t < a.times.count; ++t) {
        const double xa = a.field(var, t)[point] - ma;
        const double xb = b.field(var, t)[point] - mb;
        ab += xa * xb;
        aa += xa * xa;
        bb += xb * xb;
      }
      worst = std::max(worst, std::abs(ab / std::sqrt(aa * bb)));
    }
    CHECK(worst < 0.2);
  }

  SUBCASE("land moisture stays non-negative and precip analog is bounded") {
    const FieldArchive a = gen_truth(p, 1, 9);
    const int precip = a.var_index("precipa");
    const int land = a.var_index("land");
    for (const float v : a.values[precip]) CHECK(v >= 0.0f);
    for (const float v : a.values[land]) CHECK(v >= 0.0f);
  }
}

TEST_CASE("default parameters generate a chaotic, scale-separated system") {
  // Default-sized system at a shorter record: K=36, J=10, R=8.
  ToyParams p;
  p.forcing.assign(p.rings, 8.0);

  // Twin-experiment divergence: a tiny perturbation must grow (positive
  // leading Lyapunov exponent).
  ToyState a = initial_state(p, 100);
  for (std::int64_t step = -kStepsPerYear / 4; step < 0; ++step) {
    a = advance_snapshot(a, p, step);
  }
  ToyState b = a;
  b.x[0] += 1e-8;

  auto distance = [&](const ToyState& u, const ToyState& v) {
    double ss = 0.0;
    for (std::size_t i = 0; i < u.x.size(); ++i) {
      ss += (u.x[i] - v.x[i]) * (u.x[i] - v.x[i]);
    }
    return std::sqrt(ss);
  };
  const double d0 = distance(a, b);
  for (int step = 0; step < 40; ++step) {  // 10 days
    a = advance_snapshot(a, p, step);
    b = advance_snapshot(b, p, step);
  }
  const double d1 = distance(a, b);
  CHECK(d1 > 100.0 * d0);  // errors double many times over 10 days

  // Ocean memory: autocorrelation e-folding time at least 5x the fast field.
  const FieldArchive archive = gen_truth(p, 2, 7, 1);
  auto efold = [&](int var, int point) {
    const std::int64_t n = archive.times.count;
    double mean = 0.0;
    for (std::int64_t t = 0; t < n; ++t) mean += archive.field(var, t)[point];
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
      const double x = archive.field(var, t)[point] - mean;
      denom += x * x;
    }
    for (int lag = 1; lag < 2000; ++lag) {
      double num = 0.0;
      for (std::int64_t t = 0; t + lag < n; ++t) {
        num += (archive.field(var, t)[point] - mean) *
               (archive.field(var, t + lag)[point] - mean);
      }
      if (num / denom < std::exp(-1.0)) return lag;
    }
    return 2000;
  };
  const int x_efold = efold(archive.var_index("z500a"), 40);
  const int o_efold = efold(archive.var_index("ocean"), 40);
  CHECK(o_efold >= 5 * x_efold);
}
