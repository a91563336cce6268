#include <cmath>
#include <numeric>

#include "doctest.h"
#include "subcast/indices.hpp"
#include "subcast/rng.hpp"

using namespace subcast;
using namespace subcast::indices;

namespace {

constexpr double kPi = 3.14159265358979323846;

// data[t][x] = cos(k x - w t) on a ring of n points.
std::vector<double> planted_wave(int ntime, int nspace, int wavenumber,
                                 double omega, double phase = 0.0) {
  std::vector<double> data(static_cast<std::size_t>(ntime) * nspace);
  for (int t = 0; t < ntime; ++t) {
    for (int x = 0; x < nspace; ++x) {
      data[static_cast<std::size_t>(t) * nspace + x] =
          std::cos(2.0 * kPi * wavenumber * x / nspace - omega * t + phase);
    }
  }
  return data;
}

double pattern_correlation(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

AnomalySeries series_on_grid(const Grid& grid, std::int64_t count) {
  return AnomalySeries::create(grid, {"x"}, TimeAxis{0, count});
}

Grid tropical_grid() {
  return Grid::regular({-10.0, 0.0, 10.0, 30.0},
                       {0, 30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330});
}

}  // namespace

TEST_CASE("eof pair") {
  SUBCASE("rank-1 data: leading pattern proportional to the factor") {
    const int nt = 40, ns = 12;
    std::vector<double> pattern(ns), data(static_cast<std::size_t>(nt) * ns);
    RngStream rng(21);
    for (int s = 0; s < ns; ++s) pattern[s] = std::sin(0.7 * s) + 0.2;
    for (int t = 0; t < nt; ++t) {
      const double a = rng.normal();
      for (int s = 0; s < ns; ++s) {
        data[static_cast<std::size_t>(t) * ns + s] = a * pattern[s];
      }
    }
    const std::vector<double> weights(ns, 1.0);
    const EofBasis basis = eof_pair(data, nt, ns, weights);
    CHECK(std::abs(pattern_correlation(basis.pattern1, pattern)) >
          0.999999999);
    CHECK(basis.eigenvalue2 ==
          doctest::Approx(0.0).scale(basis.eigenvalue1).epsilon(1e-10));
  }

  SUBCASE("planted propagating wave: quadrature pair, equal eigenvalues") {
    const int nt = 240, ns = 24;
    const auto data = planted_wave(nt, ns, 2, 2.0 * kPi / 60.0);
    const std::vector<double> weights(ns, 1.0);
    const EofBasis basis = eof_pair(data, nt, ns, weights);

    // Patterns span {cos kx, sin kx}: both must be unit-amplitude waves of
    // wavenumber 2, mutually orthogonal, with near-equal eigenvalues.
    std::vector<double> coswave(ns), sinwave(ns);
    for (int x = 0; x < ns; ++x) {
      coswave[x] = std::cos(2.0 * kPi * 2 * x / ns);
      sinwave[x] = std::sin(2.0 * kPi * 2 * x / ns);
    }
    const double c1 = pattern_correlation(basis.pattern1, coswave);
    const double s1 = pattern_correlation(basis.pattern1, sinwave);
    CHECK(std::sqrt(c1 * c1 + s1 * s1) > 0.99);
    const double c2 = pattern_correlation(basis.pattern2, coswave);
    const double s2 = pattern_correlation(basis.pattern2, sinwave);
    CHECK(std::sqrt(c2 * c2 + s2 * s2) > 0.99);
    CHECK(basis.eigenvalue1 ==
          doctest::Approx(basis.eigenvalue2).epsilon(0.05));

    double dot = 0.0;
    for (int s = 0; s < ns; ++s) dot += basis.pattern1[s] * basis.pattern2[s];
    CHECK(std::abs(dot) < 1e-8);

    // PCs are in temporal quadrature and the phase advances forward.
    std::vector<double> snapshot(ns);
    double prev_angle = 0.0;
    int advancing = 0;
    for (int t = 0; t < 60; ++t) {
      for (int s = 0; s < ns; ++s) {
        snapshot[s] = data[static_cast<std::size_t>(t) * ns + s];
      }
      const double pc1 = basis.project(snapshot, 1);
      const double pc2 = basis.project(snapshot, 2);
      const double angle = std::atan2(pc2, pc1);
      if (t > 0) {
        double delta = angle - prev_angle;
        while (delta > kPi) delta -= 2.0 * kPi;
        while (delta < -kPi) delta += 2.0 * kPi;
        if (delta > 0.0) ++advancing;
      }
      prev_angle = angle;
    }
    CHECK(advancing >= 58);
  }

  SUBCASE("column permutation equivariance") {
    const int nt = 30, ns = 8;
    RngStream rng(22);
    std::vector<double> data(static_cast<std::size_t>(nt) * ns);
    for (double& v : data) v = rng.normal();
    std::vector<double> weights(ns);
    for (int s = 0; s < ns; ++s) weights[s] = 0.5 + 0.1 * s;

    std::vector<int> perm(ns);
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[0], perm[5]);
    std::swap(perm[2], perm[7]);
    std::vector<double> pdata(data.size());
    std::vector<double> pweights(ns);
    for (int t = 0; t < nt; ++t) {
      for (int s = 0; s < ns; ++s) {
        pdata[static_cast<std::size_t>(t) * ns + perm[s]] =
            data[static_cast<std::size_t>(t) * ns + s];
      }
    }
    for (int s = 0; s < ns; ++s) pweights[perm[s]] = weights[s];

    const EofBasis a = eof_pair(data, nt, ns, weights);
    const EofBasis b = eof_pair(pdata, nt, ns, pweights);
    for (int s = 0; s < ns; ++s) {
      CHECK(b.pattern1[perm[s]] == doctest::Approx(a.pattern1[s]).epsilon(1e-8));
    }
    CHECK(a.eigenvalue1 == doctest::Approx(b.eigenvalue1).epsilon(1e-10));
  }

  SUBCASE("explained variance fractions are ordered and bounded") {
    RngStream rng(23);
    const int nt = 50, ns = 10;
    std::vector<double> data(static_cast<std::size_t>(nt) * ns);
    for (double& v : data) v = rng.normal();
    const EofBasis basis = eof_pair(data, nt, ns, std::vector<double>(ns, 1.0));
    CHECK(basis.explained1 >= basis.explained2);
    CHECK(basis.explained1 + basis.explained2 <= 1.0 + 1e-12);
    CHECK(basis.eigenvalue1 >= basis.eigenvalue2);
  }

  SUBCASE("fewer than two spatial points is degenerate") {
    CHECK_THROWS_AS(eof_pair({1.0, 2.0, 3.0}, 3, 1, {1.0}), NumericalError);
  }
}

TEST_CASE("intraseasonal filter") {
  const Grid grid = tropical_grid();
  const int history = kIntraseasonalDays * kStepsPerDay;

  SUBCASE("constant series filters to zero") {
    AnomalySeries s = series_on_grid(grid, history + 40);
    for (auto& v : s.values[0]) v = 3.25f;
    const AnomalySeries f = intraseasonal_filter(s);
    CHECK(f.times.count == 40);
    CHECK(f.times.start == history);
    for (const auto& v : f.values[0]) CHECK(std::abs(v) < 1e-5f);
  }

  SUBCASE("linear trend leaves the running-mean offset") {
    AnomalySeries s = series_on_grid(grid, history + 10);
    const double slope = 0.01;
    for (std::int64_t t = 0; t < s.times.count; ++t) {
      float* f = s.field(0, t);
      for (int p = 0; p < grid.npoints(); ++p) {
        f[p] = static_cast<float>(slope * static_cast<double>(t));
      }
    }
    const AnomalySeries f = intraseasonal_filter(s);
    // Direct computation: a t - mean(a (t-480..t-1)) = a (480+1)/2
    const double expected = slope * (history + 1) / 2.0;
    for (std::int64_t t = 0; t < f.times.count; ++t) {
      CHECK(f.field(0, t)[0] == doctest::Approx(expected).epsilon(1e-3));
    }
  }

  SUBCASE("30-day oscillation amplitude survives within 15%") {
    AnomalySeries s = series_on_grid(grid, history + 30 * kStepsPerDay * 4);
    const double period_steps = 30.0 * kStepsPerDay;
    for (std::int64_t t = 0; t < s.times.count; ++t) {
      const float v =
          static_cast<float>(std::sin(2.0 * kPi * t / period_steps));
      float* f = s.field(0, t);
      for (int p = 0; p < grid.npoints(); ++p) f[p] = v;
    }
    const AnomalySeries f = intraseasonal_filter(s);
    // Analytic response of removing a 120-day running mean from a 30-day
    // sinusoid: gain = |1 - sinc|; the residual amplitude stays near 1.
    float peak = 0.0f;
    for (std::int64_t t = 0; t < f.times.count; ++t) {
      peak = std::max(peak, std::abs(f.field(0, t)[0]));
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(0.15));
  }

  SUBCASE("insufficient history is rejected") {
    AnomalySeries s = series_on_grid(grid, history);
    CHECK_THROWS_AS(intraseasonal_filter(s), ConfigError);
  }
}

TEST_CASE("rmm phase octants") {
  double amp = 0.0;
  CHECK(rmm_phase(1.0, 1.0, &amp) == 6);
  CHECK(amp == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rmm_phase(1.0, 0.0) == 5);
  CHECK(rmm_phase(-1.0, -1.0) == 2);  // theta = 225 degrees
  CHECK(rmm_phase(0.0, 0.0) == 0);    // zero-amplitude sentinel

  SUBCASE("every nonzero point maps to exactly one phase") {
    RngStream rng(24);
    for (int trial = 0; trial < 500; ++trial) {
      const double r1 = rng.normal();
      const double r2 = rng.normal();
      if (r1 == 0.0 && r2 == 0.0) continue;
      const int phase = rmm_phase(r1, r2);
      CHECK(phase >= 1);
      CHECK(phase <= 8);
      double theta = std::atan2(r2, r1) * 180.0 / kPi;
      if (theta < 0) theta += 360.0;
      static constexpr int kExpected[8] = {5, 6, 7, 8, 1, 2, 3, 4};
      CHECK(phase == kExpected[std::min(static_cast<int>(theta / 45.0), 7)]);
    }
  }

  SUBCASE("boundaries are half-open") {
    CHECK(rmm_phase(1.0, 0.0) == 5);                      // 0 degrees
    CHECK(rmm_phase(std::cos(kPi / 4), std::sin(kPi / 4)) == 6);  // 45 degrees
    CHECK(rmm_phase(-1.0, 0.0) == 1);                     // 180 degrees
  }
}

TEST_CASE("rmm basis and projection") {
  const int nt = 360, nlon = 16;
  // Three tropical fields carrying the same eastward wave with different
  // amplitudes and offsets.
  const auto wave = planted_wave(nt, nlon, 1, 2.0 * kPi / 80.0);
  std::vector<double> olr(wave.size()), ua(wave.size()), ub(wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i) {
    olr[i] = 3.0 * wave[i];
    ua[i] = 1.5 * planted_wave(nt, nlon, 1, 2.0 * kPi / 80.0, 0.5)[i];
    ub[i] = 0.8 * planted_wave(nt, nlon, 1, 2.0 * kPi / 80.0, 1.0)[i];
  }
  const RmmBasis basis = rmm_basis(olr, ua, ub, nt, nlon);

  SUBCASE("projection identity: basis-period index is standardized") {
    std::vector<std::int64_t> times(nt);
    std::iota(times.begin(), times.end(), 0);
    const RmmIndex idx = rmm_project(olr, ua, ub, nt, times, basis);
    double ss1 = 0.0, ss2 = 0.0;
    for (int t = 0; t < nt; ++t) {
      ss1 += idx.rmm1[t] * idx.rmm1[t];
      ss2 += idx.rmm2[t] * idx.rmm2[t];
    }
    CHECK(std::sqrt(ss1 / nt) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::sqrt(ss2 / nt) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("planted eastward wave advances phase monotonically") {
    std::vector<std::int64_t> times(nt);
    std::iota(times.begin(), times.end(), 0);
    const RmmIndex idx = rmm_project(olr, ua, ub, nt, times, basis);
    int advancing = 0, total = 0;
    double prev = std::atan2(idx.rmm2[0], idx.rmm1[0]);
    for (int t = 1; t < 100; ++t) {
      const double angle = std::atan2(idx.rmm2[t], idx.rmm1[t]);
      double delta = angle - prev;
      while (delta > kPi) delta -= 2.0 * kPi;
      while (delta < -kPi) delta += 2.0 * kPi;
      if (delta > 0.0) ++advancing;
      ++total;
      prev = angle;
    }
    CHECK(advancing == total);
  }

  SUBCASE("zero anomalies give amplitude zero and the phase sentinel") {
    const std::vector<double> zeros(static_cast<std::size_t>(4) * nlon, 0.0);
    const RmmIndex idx =
        rmm_project(zeros, zeros, zeros, 4, {0, 1, 2, 3}, basis);
    for (int t = 0; t < 4; ++t) {
      CHECK(idx.amplitude[t] == 0.0);
      CHECK(idx.phase[t] == 0);
    }
  }

  SUBCASE("axis mismatch is rejected") {
    std::vector<double> bad(static_cast<std::size_t>(nt) * (nlon + 1), 0.0);
    CHECK_THROWS_AS(rmm_basis(olr, ua, bad, nt, nlon), ConfigError);
  }
}

TEST_CASE("bivariate skill") {
  RngStream rng(25);
  const int n = 64;
  std::vector<double> a1(n), a2(n);
  for (int t = 0; t < n; ++t) {
    a1[t] = rng.normal();
    a2[t] = rng.normal();
  }

  SUBCASE("identical indices give 1, negated give -1") {
    CHECK(bivariate_skill(a1, a2, a1, a2) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> n1(n), n2(n);
    for (int t = 0; t < n; ++t) {
      n1[t] = -a1[t];
      n2[t] = -a2[t];
    }
    CHECK(bivariate_skill(n1, n2, a1, a2) ==
          doctest::Approx(-1.0).epsilon(1e-12));
  }

  SUBCASE("a 90-degree rotation is orthogonal under the bivariate form") {
    std::vector<double> r1(n), r2(n);
    for (int t = 0; t < n; ++t) {
      r1[t] = -a2[t];
      r2[t] = a1[t];
    }
    CHECK(std::abs(bivariate_skill(r1, r2, a1, a2)) < 1e-12);
  }

  SUBCASE("invariance under a common rotation") {
    const double angle = 0.77;
    std::vector<double> b1(n), b2(n);
    for (int t = 0; t < n; ++t) {
      b1[t] = 0.8 * a1[t] + 0.1 * rng.normal();
      b2[t] = 0.8 * a2[t] + 0.1 * rng.normal();
    }
    const double base = bivariate_skill(b1, b2, a1, a2);
    auto rotate = [&](std::vector<double>& x, std::vector<double>& y) {
      for (int t = 0; t < n; ++t) {
        const double rx = std::cos(angle) * x[t] - std::sin(angle) * y[t];
        const double ry = std::sin(angle) * x[t] + std::cos(angle) * y[t];
        x[t] = rx;
        y[t] = ry;
      }
    };
    rotate(a1, a2);
    rotate(b1, b2);
    CHECK(bivariate_skill(b1, b2, a1, a2) ==
          doctest::Approx(base).epsilon(1e-10));
  }

  SUBCASE("empty pairing is rejected") {
    CHECK_THROWS_AS(bivariate_skill({}, {}, {}, {}), ConfigError);
  }
}

TEST_CASE("nao index") {
  // Sector grid covering 20-80N, 90W-40E with some extra rows/columns.
  const Grid grid = Grid::regular(
      {10, 25, 35, 45, 55, 65, 75, 85},
      {0, 20, 40, 60, 280, 300, 320, 340});
  const int nt = 400;
  AnomalySeries z500 = AnomalySeries::create(grid, {"z500a"}, TimeAxis{0, nt});

  // Planted dipole: +1 at low latitudes, -1 at high latitudes of the sector,
  // modulated by a(t), plus weak noise.
  std::vector<double> dipole(grid.npoints(), 0.0);
  const Region sector = Region::box("nao_sector", 20.0, 80.0, 270.0, 40.0);
  for (int i = 0; i < grid.nlat; ++i) {
    for (int j = 0; j < grid.nlon; ++j) {
      if (!sector.contains(grid.lat[i], grid.lon[j])) continue;
      dipole[grid.point(i, j)] = grid.lat[i] >= 55.0 ? -1.0 : 1.0;
    }
  }
  RngStream rng(26);
  std::vector<double> amplitude(nt);
  for (int t = 0; t < nt; ++t) {
    amplitude[t] = rng.normal();
    float* f = z500.field(0, t);
    for (int p = 0; p < grid.npoints(); ++p) {
      f[p] = static_cast<float>(amplitude[t] * dipole[p] + 0.05 * rng.normal());
    }
  }

  const NaoBasis basis = nao_basis(z500, 0, sector);
  const PatternIndex idx = nao_index(z500, 0, basis);

  SUBCASE("planted amplitude is recovered with r > 0.99") {
    double r = 0.0, aa = 0.0, ii = 0.0;
    for (int t = 0; t < nt; ++t) {
      r += amplitude[t] * idx.values[t];
      aa += amplitude[t] * amplitude[t];
      ii += idx.values[t] * idx.values[t];
    }
    CHECK(std::abs(r / std::sqrt(aa * ii)) > 0.99);
  }

  SUBCASE("sign convention: positive index = below-normal high-latitude z500") {
    // amplitude > 0 means negative height anomalies at the high-lat center,
    // so the index must correlate positively with amplitude.
    double r = 0.0;
    for (int t = 0; t < nt; ++t) r += amplitude[t] * idx.values[t];
    CHECK(r > 0.0);
  }

  SUBCASE("standardization over the basis period") {
    double mean = 0.0, ss = 0.0;
    for (double v : idx.values) mean += v;
    mean /= nt;
    for (double v : idx.values) ss += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::sqrt(ss / nt) == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("anomalies orthogonal to the pattern give a near-zero index") {
    AnomalySeries ortho = AnomalySeries::create(grid, {"z500a"}, TimeAxis{0, 8});
    // Zonal wavenumber-1 structure inside the sector is orthogonal to the
    // meridional dipole by symmetry.
    for (std::int64_t t = 0; t < 8; ++t) {
      float* f = ortho.field(0, t);
      for (int i = 0; i < grid.nlat; ++i) {
        for (int j = 0; j < grid.nlon; ++j) {
          f[grid.point(i, j)] =
              static_cast<float>(std::sin(2.0 * kPi * j / grid.nlon));
        }
      }
    }
    const PatternIndex oidx = nao_index(ortho, 0, basis);
    for (double v : oidx.values) CHECK(std::abs(v) < 0.2);
  }

  SUBCASE("missing region is rejected") {
    const Grid southern = Grid::regular({-60, -40, -20}, {0, 120, 240});
    AnomalySeries s = AnomalySeries::create(southern, {"z500a"}, TimeAxis{0, 4});
    CHECK_THROWS_AS(nao_basis(s, 0, sector), ConfigError);
  }
}

TEST_CASE("point pattern indices") {
  const Grid grid = Grid::regular(
      {20, 30, 45, 55, 60},
      {20, 40, 75, 85, 115, 125, 145, 155, 165, 195, 200, 245, 275, 335, 340});
  const auto table = builtin_center_table();
  const TelePattern* pna = nullptr;
  for (const auto& p : table) {
    if (p.name == "PNA") pna = &p;
  }
  REQUIRE(pna != nullptr);

  SUBCASE("zero field gives zero index") {
    AnomalySeries s = AnomalySeries::create(grid, {"z"}, TimeAxis{0, 4});
    const PatternIndex idx = point_pattern_index(s, 0, *pna, false);
    for (double v : idx.values) CHECK(v == 0.0);
  }

  SUBCASE("PNA hand sum: alternating unit anomalies give 1.0") {
    AnomalySeries s = AnomalySeries::create(grid, {"z"}, TimeAxis{0, 1});
    float* f = s.field(0, 0);
    // +1 at positive-sign centers, -1 at negative-sign centers.
    for (const auto& c : pna->centers) {
      f[grid.nearest(c.lat, c.lon)] = static_cast<float>(c.sign);
    }
    const PatternIndex idx = point_pattern_index(s, 0, *pna, false);
    CHECK(idx.values[0] == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("linearity: sign flip negates, scaling scales") {
    RngStream rng(27);
    AnomalySeries s = AnomalySeries::create(grid, {"z"}, TimeAxis{0, 3});
    for (auto& v : s.values[0]) v = static_cast<float>(rng.normal());
    AnomalySeries neg = s;
    for (auto& v : neg.values[0]) v = -v;
    AnomalySeries scaled = s;
    for (auto& v : scaled.values[0]) v *= 3.0f;
    const auto base = point_pattern_index(s, 0, *pna, false);
    const auto flipped = point_pattern_index(neg, 0, *pna, false);
    const auto tripled = point_pattern_index(scaled, 0, *pna, false);
    for (std::size_t t = 0; t < base.values.size(); ++t) {
      CHECK(flipped.values[t] == doctest::Approx(-base.values[t]));
      CHECK(tripled.values[t] == doctest::Approx(3.0 * base.values[t]));
    }
  }

  SUBCASE("built-in table carries the five patterns") {
    CHECK(table.size() == 5);
    std::vector<std::string> names;
    for (const auto& p : table) names.push_back(p.name);
    for (const char* want : {"PNA", "EA", "WP", "EU", "PJ"}) {
      CHECK(std::find(names.begin(), names.end(), want) != names.end());
    }
  }
}

TEST_CASE("center table JSON round-trip") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "subcast_centers.json";
  const auto table = builtin_center_table();
  write_center_table(table, path);
  const auto back = load_center_table(path);
  REQUIRE(back.size() == table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    CHECK(back[k].name == table[k].name);
    REQUIRE(back[k].centers.size() == table[k].centers.size());
    for (std::size_t c = 0; c < table[k].centers.size(); ++c) {
      CHECK(back[k].centers[c].lat == table[k].centers[c].lat);
      CHECK(back[k].centers[c].lon == table[k].centers[c].lon);
      CHECK(back[k].centers[c].sign == table[k].centers[c].sign);
      CHECK(back[k].centers[c].coefficient == table[k].centers[c].coefficient);
    }
  }
  fs::remove(path);
}

TEST_CASE("hovmoller diagram") {
  const Grid grid = tropical_grid();

  SUBCASE("zonally uniform field gives constant columns") {
    AnomalySeries s = series_on_grid(grid, 20);
    for (std::int64_t t = 0; t < 20; ++t) {
      float* f = s.field(0, t);
      for (int p = 0; p < grid.npoints(); ++p) {
        f[p] = static_cast<float>(t % 5);
      }
    }
    const HovmollerDiagram d = hovmoller(s, 0);
    CHECK(d.lons.size() == static_cast<std::size_t>(grid.nlon));
    CHECK(d.times.size() == 20);
    for (std::size_t t = 0; t < d.times.size(); ++t) {
      for (std::size_t j = 1; j < d.lons.size(); ++j) {
        CHECK(d.at(t, j) == doctest::Approx(d.at(t, 0)).epsilon(1e-9));
      }
    }
  }

  SUBCASE("planted eastward wave: ridge moves at the planted speed") {
    const int nt = 48;
    AnomalySeries s = series_on_grid(grid, nt);
    // One longitude cell per time step.
    for (std::int64_t t = 0; t < nt; ++t) {
      float* f = s.field(0, t);
      for (int i = 0; i < grid.nlat; ++i) {
        for (int j = 0; j < grid.nlon; ++j) {
          f[grid.point(i, j)] = static_cast<float>(
              std::cos(2.0 * kPi * (j - static_cast<double>(t)) / grid.nlon));
        }
      }
    }
    const HovmollerDiagram d = hovmoller(s, 0);
    for (std::size_t t = 1; t < 12; ++t) {
      int arg0 = 0, arg1 = 0;
      for (std::size_t j = 0; j < d.lons.size(); ++j) {
        if (d.at(t - 1, j) > d.at(t - 1, arg0)) arg0 = static_cast<int>(j);
        if (d.at(t, j) > d.at(t, arg1)) arg1 = static_cast<int>(j);
      }
      const int shift = (arg1 - arg0 + grid.nlon) % grid.nlon;
      CHECK(shift == 1);  // within one grid cell per time step
    }
  }

  SUBCASE("band absent from the grid is rejected") {
    const Grid polar = Grid::regular({60, 70, 80}, {0, 120, 240});
    AnomalySeries s = AnomalySeries::create(polar, {"x"}, TimeAxis{0, 4});
    CHECK_THROWS_AS(hovmoller(s, 0), ConfigError);
  }
}
