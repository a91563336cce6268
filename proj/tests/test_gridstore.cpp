#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "subcast/archive.hpp"
#include "subcast/climatology.hpp"
#include "subcast/rng.hpp"

using namespace subcast;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("subcast_test_" + std::string(tag) + "_" +
                      std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Grid small_grid() {
  return Grid::regular({-30.0, 0.0, 30.0}, {0.0, 90.0, 180.0, 270.0});
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

FieldArchive random_archive(int nvars, std::int64_t count, std::uint64_t seed) {
  std::vector<std::string> vars;
  for (int v = 0; v < nvars; ++v) vars.push_back("v" + std::to_string(v));
  FieldArchive a = FieldArchive::create(
      Grid::regular({-45.0, -15.0, 15.0, 45.0, 60.0, 70.0, 80.0, 85.0},
                    {0, 22.5, 45, 67.5, 90, 112.5, 135, 157.5, 180, 202.5, 225,
                     247.5, 270, 292.5, 315, 337.5}),
      vars, TimeAxis{0, count});
  RngStream rng(seed);
  for (auto& payload : a.values) {
    for (auto& x : payload) x = static_cast<float>(rng.normal());
  }
  return a;
}

}  // namespace

TEST_CASE("archive round-trip is bit-exact") {
  const fs::path dir = temp_dir("roundtrip");
  FieldArchive a = random_archive(2, 40, 7);
  write_archive(a, dir / "a");
  const FieldArchive b = load_archive(dir / "a");
  CHECK(b.variables == a.variables);
  CHECK(b.times.start == a.times.start);
  CHECK(b.times.count == a.times.count);
  write_archive(b, dir / "b");
  for (const auto& var : a.variables) {
    CHECK(file_bytes(dir / "a" / (var + ".f32")) ==
          file_bytes(dir / "b" / (var + ".f32")));
  }
  fs::remove_all(dir);
}

TEST_CASE("archive rejects a non-6-hour time axis") {
  CHECK_THROWS_WITH_AS(
      FieldArchive::create(small_grid(), {"x"},
                           std::vector<std::int64_t>{0, 2, 4}),
      "non-uniform 6-hour axis", ConfigError);

  // A manifest declaring 12-hour steps is rejected on load.
  const fs::path dir = temp_dir("axis");
  FieldArchive a = FieldArchive::create(small_grid(), {"x"}, TimeAxis{0, 4});
  write_archive(a, dir / "a");
  auto manifest = file_bytes(dir / "a" / "manifest.json");
  const auto pos = manifest.find("\"step_hours\": 6");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 15, "\"step_hours\": 12");
  std::ofstream(dir / "a" / "manifest.json") << manifest;
  CHECK_THROWS_AS(load_archive(dir / "a"), ConfigError);
  try {
    load_archive(dir / "a");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("non-uniform 6-hour axis") !=
          std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("truncated payload yields a size-mismatch error") {
  const fs::path dir = temp_dir("truncated");
  FieldArchive a = random_archive(1, 10, 3);
  write_archive(a, dir / "a");
  const fs::path payload = dir / "a" / "v0.f32";
  fs::resize_file(payload, fs::file_size(payload) - 8);
  CHECK_THROWS_AS(load_archive(dir / "a"), ConfigError);
  try {
    load_archive(dir / "a");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("size mismatch") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("archive manifests are self-describing") {
  const fs::path dir = temp_dir("selfdesc");
  FieldArchive a = random_archive(1, 8, 11);
  a.times.start = 3 * kStepsPerYear + 17;
  write_archive(a, dir / "a");
  const FieldArchive b = load_archive(dir / "a");
  CHECK(b.times.start == a.times.start);
  CHECK(b.grid.same_as(a.grid));
  fs::remove_all(dir);
}

TEST_CASE("unknown format version is rejected") {
  const fs::path dir = temp_dir("version");
  FieldArchive a = FieldArchive::create(small_grid(), {"x"}, TimeAxis{0, 4});
  write_archive(a, dir / "a");
  auto manifest = file_bytes(dir / "a" / "manifest.json");
  const auto pos = manifest.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 19, "\"format_version\": 9");
  std::ofstream(dir / "a" / "manifest.json") << manifest;
  CHECK_THROWS_AS(load_archive(dir / "a"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("climatology of a constant field is that constant") {
  FieldArchive a = FieldArchive::create(small_grid(), {"x"},
                                        TimeAxis{0, 2 * kStepsPerYear});
  for (auto& x : a.values[0]) x = 4.25f;
  const Climatology clim = compute_climatology(a, 0, 1, 0);
  for (int ck = 0; ck < kCalendarKeys; ck += 97) {
    const float* mean = clim.mean_field(0, ck);
    const float* q33 = clim.quantile_field(0, 0, ck);
    const float* q90 = clim.quantile_field(0, 2, ck);
    for (int p = 0; p < a.grid.npoints(); ++p) {
      CHECK(mean[p] == doctest::Approx(4.25).epsilon(1e-12));
      CHECK(q33[p] == doctest::Approx(4.25).epsilon(1e-12));
      CHECK(q90[p] == doctest::Approx(4.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("two-year key mean is the arithmetic mean") {
  FieldArchive a = FieldArchive::create(small_grid(), {"x"},
                                        TimeAxis{0, 2 * kStepsPerYear});
  for (std::int64_t t = 0; t < a.times.count; ++t) {
    const float value = t < kStepsPerYear ? 1.0f : 3.0f;
    float* f = a.field(0, t);
    for (int p = 0; p < a.grid.npoints(); ++p) f[p] = value;
  }
  const Climatology clim = compute_climatology(a, 0, 1, 0);
  CHECK(clim.mean_field(0, 500)[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("seasonal cycle is recovered from noisy synthetic years") {
  // 15 synthetic years of a day-of-year sinusoid plus iid noise; per-key
  // averages must recover the cycle within 3 sigma / sqrt(15).
  const int nyears = 15;
  const double sigma = 0.5;
  FieldArchive a = FieldArchive::create(
      small_grid(), {"x"}, TimeAxis{0, static_cast<std::int64_t>(nyears) *
                                           kStepsPerYear});
  RngStream rng(99);
  std::vector<double> cycle(kDaysPerYear);
  for (int d = 0; d < kDaysPerYear; ++d) {
    cycle[d] = 2.0 * std::sin(2.0 * 3.14159265358979 * d / kDaysPerYear);
  }
  for (std::int64_t t = 0; t < a.times.count; ++t) {
    const double base = cycle[day_of_year(t)];
    float* f = a.field(0, t);
    for (int p = 0; p < a.grid.npoints(); ++p) {
      f[p] = static_cast<float>(base + sigma * rng.normal());
    }
  }
  const Climatology clim = compute_climatology(a, 0, nyears - 1, 0);

  // Oracle: direct per-key averaging, independent of the implementation.
  for (int d = 0; d < kDaysPerYear; d += 53) {
    for (int h = 0; h < kStepsPerDay; ++h) {
      const int ck = d * kStepsPerDay + h;
      const float* mean = clim.mean_field(0, ck);
      for (int p = 0; p < a.grid.npoints(); p += 3) {
        double acc = 0.0;
        for (int year = 0; year < nyears; ++year) {
          acc += a.field(0, static_cast<std::int64_t>(year) * kStepsPerYear +
                                ck)[p];
        }
        CHECK(mean[p] ==
              doctest::Approx(acc / nyears).epsilon(1e-6).scale(1.0));
      }
    }
  }

  // Cycle recovery within sampling error: 3 sigma / sqrt(15) pointwise holds
  // for ~99.7% of comparisons; assert the fraction plus a hard 5-sigma cap.
  const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(nyears));
  int checked = 0, within = 0;
  double worst = 0.0;
  for (int d = 0; d < kDaysPerYear; d += 13) {
    const float* mean = clim.mean_field(0, d * kStepsPerDay);
    for (int p = 0; p < a.grid.npoints(); ++p) {
      const double err = std::abs(mean[p] - cycle[d]);
      worst = std::max(worst, err);
      within += err < tol ? 1 : 0;
      ++checked;
    }
  }
  CHECK(checked > 300);
  CHECK(static_cast<double>(within) / checked > 0.99);
  CHECK(worst < 5.0 * sigma / std::sqrt(static_cast<double>(nyears)));
}

TEST_CASE("climatology window coverage is enforced") {
  FieldArchive a =
      FieldArchive::create(small_grid(), {"x"}, TimeAxis{0, kStepsPerYear});
  CHECK_THROWS_AS(compute_climatology(a, 0, 1, 0), ConfigError);
}

TEST_CASE("model climatology basics") {
  const Grid grid = small_grid();
  const std::vector<std::string> vars = {"x"};

  SUBCASE("all-zero hindcasts give a zero climatology") {
    std::vector<EnsembleHindcast> sweep;
    for (int k = 0; k < 3; ++k) {
      sweep.push_back(
          EnsembleHindcast::create(grid, vars, k * 20 * kStepsPerDay, 2, 8));
    }
    const Climatology clim = compute_model_climatology(sweep, 0, 0);
    for (auto key : clim.keys()) {
      const float* mean =
          clim.mean_field(0, static_cast<int>(key / 1024),
                          static_cast<int>(key % 1024));
      for (int p = 0; p < grid.npoints(); ++p) CHECK(mean[p] == 0.0f);
    }
  }

  SUBCASE("single member, single year equals that hindcast") {
    EnsembleHindcast h = EnsembleHindcast::create(grid, vars, 40, 1, 6);
    RngStream rng(5);
    for (int lead = 0; lead <= 6; ++lead) {
      float* f = h.field(0, 0, lead);
      for (int p = 0; p < grid.npoints(); ++p) {
        f[p] = static_cast<float>(rng.normal());
      }
    }
    const Climatology clim = compute_model_climatology({h}, 0, 0);
    for (int lead = 0; lead <= 6; ++lead) {
      const float* mean = clim.mean_field(0, calendar_key(40 + lead), lead);
      const float* src = h.field(0, 0, lead);
      for (int p = 0; p < grid.npoints(); ++p) CHECK(mean[p] == src[p]);
    }
  }

  SUBCASE("hindcast anomalies about their own climatology average to zero") {
    std::vector<EnsembleHindcast> sweep;
    RngStream rng(17);
    for (int year = 0; year < 3; ++year) {
      EnsembleHindcast h = EnsembleHindcast::create(
          grid, vars, static_cast<std::int64_t>(year) * kStepsPerYear + 100, 4,
          10);
      for (int m = 0; m < 4; ++m) {
        for (int lead = 0; lead <= 10; ++lead) {
          float* f = h.field(m, 0, lead);
          for (int p = 0; p < grid.npoints(); ++p) {
            f[p] = static_cast<float>(rng.normal() + lead * 0.1);
          }
        }
      }
      sweep.push_back(std::move(h));
    }
    const Climatology clim = compute_model_climatology(sweep, 0, 2);
    // Mean anomaly per (key, lead) across the sweep must vanish.
    for (int lead = 0; lead <= 10; ++lead) {
      double acc = 0.0;
      int n = 0;
      for (const auto& h : sweep) {
        const EnsembleHindcast anoms = anomaly(h, clim);
        for (int m = 0; m < anoms.n_members; ++m) {
          const float* f = anoms.field(m, 0, lead);
          for (int p = 0; p < grid.npoints(); ++p) {
            acc += f[p];
            ++n;
          }
        }
      }
      CHECK(std::abs(acc / n) < 1e-6);
    }
  }
}

TEST_CASE("anomaly identities") {
  const Grid grid = small_grid();
  FieldArchive obs = FieldArchive::create(grid, {"x"},
                                          TimeAxis{0, 2 * kStepsPerYear});
  RngStream rng(23);
  for (auto& x : obs.values[0]) x = static_cast<float>(10.0 + rng.normal());
  const Climatology clim = compute_climatology(obs, 0, 1, 0);

  SUBCASE("data equal to the climatology gives zero anomalies") {
    FieldArchive data = FieldArchive::create(grid, {"x"},
                                             TimeAxis{0, kStepsPerYear});
    for (std::int64_t t = 0; t < data.times.count; ++t) {
      const float* mean = clim.mean_field(0, calendar_key(t));
      std::copy(mean, mean + grid.npoints(), data.field(0, t));
    }
    const AnomalySeries anoms = anomaly(data, clim);
    for (const auto& x : anoms.values[0]) CHECK(std::abs(x) < 1e-6f);
  }

  SUBCASE("clim mean 10, datum 12 gives anomaly 2") {
    FieldArchive data = FieldArchive::create(grid, {"x"}, TimeAxis{0, 1});
    const float* mean = clim.mean_field(0, 0);
    for (int p = 0; p < grid.npoints(); ++p) {
      data.field(0, 0)[p] = mean[p] + 2.0f;
    }
    const AnomalySeries anoms = anomaly(data, clim);
    for (int p = 0; p < grid.npoints(); ++p) {
      CHECK(anoms.field(0, 0)[p] == doctest::Approx(2.0f));
    }
  }

  SUBCASE("model climatology applied to observations is rejected") {
    EnsembleHindcast h = EnsembleHindcast::create(grid, {"x"}, 0, 1, 4);
    const Climatology model_clim = compute_model_climatology({h}, 0, 0);
    CHECK_THROWS_AS(anomaly(obs, model_clim), ConfigError);
  }

  SUBCASE("anomaly of climatology source data has near-zero per-key mean") {
    const AnomalySeries anoms = anomaly(obs, clim);
    // halfwidth 0: per-key mean equals the discretization residual.
    for (int ck = 0; ck < kCalendarKeys; ck += 477) {
      for (int p = 0; p < grid.npoints(); ++p) {
        double acc = 0.0;
        int n = 0;
        for (int year = 0; year < 2; ++year) {
          acc += anoms.field(0, year * kStepsPerYear + ck)[p];
          ++n;
        }
        CHECK(std::abs(acc / n) < 1e-6);
      }
    }
  }

  SUBCASE("observed-vs-model anomaly difference equals the mean difference") {
    // Two climatologies applied to the same hindcast: the anomaly difference
    // must equal the climatology-mean difference pointwise.
    EnsembleHindcast h = EnsembleHindcast::create(grid, {"x"}, 0, 2, 4);
    RngStream hr(31);
    for (int m = 0; m < 2; ++m) {
      for (int lead = 0; lead <= 4; ++lead) {
        float* f = h.field(m, 0, lead);
        for (int p = 0; p < grid.npoints(); ++p) {
          f[p] = static_cast<float>(hr.normal());
        }
      }
    }
    const Climatology model_clim = compute_model_climatology({h}, 0, 0);
    const EnsembleHindcast a_obs = anomaly(h, clim);
    const EnsembleHindcast a_mod = anomaly(h, model_clim);
    for (int lead = 0; lead <= 4; ++lead) {
      const float* mo = clim.mean_field(0, calendar_key(lead));
      const float* mm = model_clim.mean_field(0, calendar_key(lead), lead);
      for (int p = 0; p < grid.npoints(); ++p) {
        const float diff = a_obs.field(0, 0, lead)[p] - a_mod.field(0, 0, lead)[p];
        CHECK(diff == doctest::Approx(mm[p] - mo[p]).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("area mean") {
  SUBCASE("constant field") {
    const Grid grid = small_grid();
    std::vector<float> field(grid.npoints(), 3.5f);
    CHECK(area_mean(grid, field.data(), Region::global()) ==
          doctest::Approx(3.5));
  }

  SUBCASE("antisymmetric field on a symmetric grid averages to zero") {
    const Grid grid = Grid::regular({-60, -30, 30, 60}, {0, 90, 180, 270});
    std::vector<float> field(grid.npoints());
    for (int i = 0; i < grid.nlat; ++i) {
      for (int j = 0; j < grid.nlon; ++j) {
        field[grid.point(i, j)] = grid.lat[i] > 0 ? 1.0f : -1.0f;
      }
    }
    CHECK(std::abs(area_mean(grid, field.data(), Region::global())) < 1e-12);
  }

  SUBCASE("two-latitude hand evaluation: (1 cos0 + 2 cos60)/(cos0 + cos60)") {
    const Grid grid = Grid::regular({0.0, 60.0}, {0.0, 180.0});
    std::vector<float> field = {1.0f, 1.0f, 2.0f, 2.0f};
    CHECK(area_mean(grid, field.data(), Region::global()) ==
          doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("empty intersection throws") {
    const Grid grid = small_grid();
    std::vector<float> field(grid.npoints(), 0.0f);
    CHECK_THROWS_AS(
        area_mean(grid, field.data(), Region::box("polar", 80, 90, 0, 360)),
        ConfigError);
  }

  SUBCASE("linearity") {
    const Grid grid = small_grid();
    RngStream rng(3);
    std::vector<float> f(grid.npoints()), g(grid.npoints()),
        combo(grid.npoints());
    for (int p = 0; p < grid.npoints(); ++p) {
      f[p] = static_cast<float>(rng.normal());
      g[p] = static_cast<float>(rng.normal());
      combo[p] = 2.0f * f[p] + 3.0f * g[p];
    }
    const double lhs = area_mean(grid, combo.data(), Region::global());
    const double rhs = 2.0 * area_mean(grid, f.data(), Region::global()) +
                       3.0 * area_mean(grid, g.data(), Region::global());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("percentiles are monotone in level") {
  FieldArchive a = random_archive(1, 3 * kStepsPerYear, 77);
  const Climatology clim = compute_climatology(a, 0, 2, 2);
  for (auto key : clim.keys()) {
    const int ck = static_cast<int>(key / 1024);
    const float* q33 = clim.quantile_field(0, 0, ck);
    const float* q66 = clim.quantile_field(0, 1, ck);
    const float* q90 = clim.quantile_field(0, 2, ck);
    for (int p = 0; p < a.grid.npoints(); ++p) {
      CHECK(q33[p] <= q66[p]);
      CHECK(q66[p] <= q90[p]);
    }
  }
}

TEST_CASE("climatology round-trips through its directory format") {
  const fs::path dir = temp_dir("clim_io");
  FieldArchive a = random_archive(2, 2 * kStepsPerYear, 13);
  const Climatology clim = compute_climatology(a, 0, 1, 1);
  write_climatology(clim, dir / "clim");
  const Climatology back = load_climatology(dir / "clim");
  CHECK(back.kind() == clim.kind());
  CHECK(back.variables() == clim.variables());
  CHECK(back.keys().size() == clim.keys().size());
  const float* m0 = clim.mean_field(1, 300);
  const float* m1 = back.mean_field(1, 300);
  for (int p = 0; p < a.grid.npoints(); ++p) CHECK(m0[p] == m1[p]);
  fs::remove_all(dir);
}
