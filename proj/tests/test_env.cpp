#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <random>

#include "ccs/env.hpp"
#include "ccs/sparse.hpp"
#include "support/oracles.hpp"

using namespace ccs;

namespace {

GridSpec uniform_grid(int nx, int ny, double perm = 100.0) {
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  g.dx = 800;
  g.dy = 800;
  g.thickness = 200;
  g.porosity = 0.2;
  g.total_compressibility = 5e-7;
  g.viscosity = 0.5;
  g.permeability.assign(g.cell_count(), perm);
  return g;
}

EnvConfig small_env(int nx, int ny) {
  EnvConfig cfg;
  cfg.grid = uniform_grid(nx, ny);
  cfg.wells = {{"W0", 0, nx / 2, ny / 2, WellKind::Injector, 0.0, 5.0}};
  ProjectArea area;
  area.owner = 0;
  for (int c = 0; c < cfg.grid.cell_count(); ++c) area.cells.push_back(c);
  area.p_threshold = 60000.0;
  cfg.areas = {area};
  cfg.p_init = 20000.0;
  cfg.p_frac = 68000.0;
  cfg.co2_density = 700.0;
  cfg.substeps_per_step = 3;
  cfg.dt_step = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("build_system: uniform 2x1 coupling matches the closed form") {
  GridSpec g = uniform_grid(2, 2);
  const auto sys = build_system(g);
  // 100 mD * (dy*thickness)/(dx*mu) * unit factor, hand-evaluated.
  const double geometric = 100.0 * (800.0 * 200.0) / (800.0 * 0.5);
  const double expected = geometric * 0.03114493073;
  CHECK(sys.coupling_x(0, 0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(sys.coupling_x(0, 0) ==
        doctest::Approx(geometric * transmissibility_unit_factor()).epsilon(1e-14));
}

TEST_CASE("build_system: 100/300 mD neighbors couple through the 150 mD harmonic mean") {
  GridSpec g = uniform_grid(2, 2);
  const double uniform_coupling = build_system(g).coupling_x(0, 0);
  g.permeability[g.index(1, 0)] = 300.0;
  g.permeability[g.index(1, 1)] = 300.0;
  const auto sys = build_system(g);
  CHECK(sys.coupling_x(0, 0) == doctest::Approx(1.5 * uniform_coupling).epsilon(1e-12));
}

TEST_CASE("build_system: non-positive permeability is rejected") {
  GridSpec g = uniform_grid(3, 3);
  g.permeability[4] = 0.0;
  CHECK_THROWS_AS(build_system(g), std::invalid_argument);
  g.permeability[4] = -5.0;
  CHECK_THROWS_AS(build_system(g), std::invalid_argument);
}

TEST_CASE("build_system: operator is symmetric positive semidefinite") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> perm(10.0, 500.0);
  GridSpec g = uniform_grid(5, 4);
  for (auto& k : g.permeability) k = perm(rng);
  const auto sys = build_system(g);
  const int n = g.cell_count();
  // quadratic form on random vectors is >= 0 and vanishes on constants
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(n), ax(n);
    for (auto& v : x) v = gauss(rng);
    sys.apply(x, ax);
    double q = 0.0;
    for (int c = 0; c < n; ++c) q += x[c] * ax[c];
    CHECK(q >= -1e-9);
  }
  std::vector<double> ones(n, 1.0), result(n);
  sys.apply(ones, result);
  for (double v : result) CHECK(std::abs(v) < 1e-6);  // cancellation at diag scale
}

TEST_CASE("step: zero rates leave a uniform field unchanged") {
  const Reservoir res(small_env(5, 5));
  const auto next = res.step(res.initial_state(), std::vector<double>{0.0});
  for (double p : next.pressure) CHECK(p == doctest::Approx(20000.0).epsilon(1e-13));
  CHECK(next.t == 1);
}

TEST_CASE("step: single injector raises the well cell to the field maximum") {
  const EnvConfig cfg = small_env(5, 5);
  const Reservoir res(cfg);
  const auto next = res.step(res.initial_state(), std::vector<double>{5.0});
  const int well_cell = cfg.grid.index(2, 2);
  CHECK(next.pressure[well_cell] > 20000.0);
  for (int c = 0; c < cfg.grid.cell_count(); ++c)
    CHECK(next.pressure[well_cell] >= next.pressure[c]);

  // dense direct solve agrees
  const auto dense = oracles::dense_step(cfg, res.initial_state().pressure, {5.0});
  for (int c = 0; c < cfg.grid.cell_count(); ++c)
    CHECK(next.pressure[c] == doctest::Approx(dense[c]).epsilon(1e-8));
}

TEST_CASE("step: superposition of rate deviations") {
  EnvConfig cfg = small_env(6, 4);
  cfg.wells = {
      {"W0", 0, 1, 1, WellKind::Injector, 0.0, 5.0},
      {"W1", 0, 4, 2, WellKind::Injector, 0.0, 5.0},
  };
  const Reservoir res(cfg);
  const auto base = res.step(res.initial_state(), std::vector<double>{0.0, 0.0});
  const auto s1 = res.step(res.initial_state(), std::vector<double>{3.0, 0.0});
  const auto s2 = res.step(res.initial_state(), std::vector<double>{0.0, 2.0});
  const auto s12 = res.step(res.initial_state(), std::vector<double>{3.0, 2.0});
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < base.pressure.size(); ++c) {
    const double lhs = s12.pressure[c] - base.pressure[c];
    const double rhs =
        (s1.pressure[c] - base.pressure[c]) + (s2.pressure[c] - base.pressure[c]);
    num += (lhs - rhs) * (lhs - rhs);
    den += lhs * lhs;
  }
  CHECK(std::sqrt(num / den) <= 1e-8);
}

TEST_CASE("step: deterministic down to the bit pattern") {
  const Reservoir res(small_env(5, 5));
  const auto a = res.step(res.initial_state(), std::vector<double>{4.2});
  const auto b = res.step(res.initial_state(), std::vector<double>{4.2});
  CHECK(a.pressure == b.pressure);
}

TEST_CASE("step: CG matches dense direct solve on random small instances") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dims(2, 6);
  std::uniform_real_distribution<double> perm(10.0, 500.0);
  std::uniform_real_distribution<double> rate(0.5, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    EnvConfig cfg = small_env(dims(rng), dims(rng));
    for (auto& k : cfg.grid.permeability) k = perm(rng);
    cfg.wells[0].i = std::uniform_int_distribution<int>(0, cfg.grid.nx - 1)(rng);
    cfg.wells[0].j = std::uniform_int_distribution<int>(0, cfg.grid.ny - 1)(rng);
    const double q = rate(rng);
    const Reservoir res(cfg);
    const auto cg = res.step(res.initial_state(), std::vector<double>{q});
    const auto dense = oracles::dense_step(cfg, res.initial_state().pressure, {q});
    double num = 0.0, den = 0.0;
    for (int c = 0; c < cfg.grid.cell_count(); ++c) {
      num += (cg.pressure[c] - dense[c]) * (cg.pressure[c] - dense[c]);
      den += dense[c] * dense[c];
    }
    CHECK(std::sqrt(num / den) <= 1e-8);
  }
}

TEST_CASE("step: rate validation") {
  const Reservoir res(small_env(4, 4));
  CHECK_THROWS_AS(res.step(res.initial_state(), std::vector<double>{9.0}),
                  std::invalid_argument);  // above rate_max
  CHECK_THROWS_AS(res.step(res.initial_state(), std::vector<double>{-1.0}),
                  std::invalid_argument);  // injector cannot extract
  CHECK_THROWS_AS(res.step(res.initial_state(), std::vector<double>{1.0, 1.0}),
                  std::invalid_argument);  // one rate per well
}

TEST_CASE("step: rates below rate_min are rejected, shut-in zero is allowed") {
  EnvConfig cfg = small_env(4, 4);
  cfg.wells[0].rate_min = 0.5;
  const Reservoir res(cfg);
  CHECK_THROWS_AS(res.step(res.initial_state(), std::vector<double>{0.25}),
                  std::invalid_argument);
  CHECK_NOTHROW(res.step(res.initial_state(), std::vector<double>{0.0}));
}

TEST_CASE("conjugate gradient: reports non-convergence when starved of iterations") {
  // 3x3 SPD system, solved exactly in 3 iterations; 1 is not enough.
  const std::vector<std::vector<double>> a{
      {4.0, 1.0, 0.0}, {1.0, 3.0, 1.0}, {0.0, 1.0, 5.0}};
  const auto apply = [&a](std::span<const double> in, std::span<double> out) {
    for (int r = 0; r < 3; ++r)
      out[r] = a[r][0] * in[0] + a[r][1] * in[1] + a[r][2] * in[2];
  };
  const std::vector<double> b{1.0, 2.0, 3.0};
  std::vector<double> x(3, 0.0);
  auto starved = conjugate_gradient(apply, b, x, 1e-14, 1);
  CHECK_FALSE(starved.converged);

  x.assign(3, 0.0);
  const auto full = conjugate_gradient(apply, b, x, 1e-14, 30);
  CHECK(full.converged);
  const auto exact = oracles::dense_solve(a, b);
  for (int r = 0; r < 3; ++r) CHECK(x[r] == doctest::Approx(exact[r]).epsilon(1e-10));
}

TEST_CASE("env config rejects an out-of-spec CG tolerance") {
  EnvConfig cfg = small_env(2, 2);
  cfg.cg_tolerance = 1e-9;  // looser than the 1e-10 contract
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("observe: initial state matches the hand-computed vector") {
  EnvConfig cfg = small_env(5, 5);
  const Reservoir res(cfg);
  const auto obs = res.observe(res.initial_state(), 0, 25);
  REQUIRE(obs.size() == 4);  // one well + area max + violation fraction + time
  CHECK(obs[0] == doctest::Approx(20000.0 / 68000.0).epsilon(1e-12));
  CHECK(obs[1] == doctest::Approx(20000.0 / 68000.0).epsilon(1e-12));
  CHECK(obs[2] == 0.0);
  CHECK(obs[3] == 0.0);
}

TEST_CASE("observe: violation fraction saturates at the threshold state") {
  EnvConfig cfg = small_env(4, 3);
  const Reservoir res(cfg);
  ReservoirState state = res.initial_state();
  for (double& p : state.pressure) p = cfg.areas[0].p_threshold;
  const auto obs = res.observe(state, 0, 25);
  CHECK(obs[2] == 1.0);
}

TEST_CASE("observe: time entry is t over horizon") {
  const Reservoir res(small_env(4, 3));
  ReservoirState state = res.initial_state();
  state.t = 12;
  const auto obs = res.observe(state, 0, 25);
  CHECK(obs.back() == doctest::Approx(0.48).epsilon(1e-12));
}

TEST_CASE("max_region_pressure") {
  const EnvConfig cfg = small_env(5, 4);
  const Reservoir res(cfg);
  ReservoirState state = res.initial_state();
  CHECK(max_region_pressure(state, cfg.areas[0]) == doctest::Approx(20000.0));

  ProjectArea inside;
  inside.owner = 0;
  inside.cells = {0, 1, 2};
  inside.p_threshold = 60000.0;
  state.pressure[1] = 70000.0;
  CHECK(max_region_pressure(state, inside) == doctest::Approx(70000.0));
  state.pressure[1] = 20000.0;
  state.pressure[10] = 90000.0;  // spike outside the area
  CHECK(max_region_pressure(state, inside) == doctest::Approx(20000.0));

  ProjectArea empty;
  CHECK_THROWS_AS(max_region_pressure(state, empty), std::invalid_argument);
}

TEST_CASE("monotone loading: max-rate injection never lowers an area maximum") {
  EnvConfig cfg = small_env(6, 4);
  const Reservoir res(cfg);
  ReservoirState state = res.initial_state();
  double prev = max_region_pressure(state, cfg.areas[0]);
  for (int t = 0; t < 10; ++t) {
    state = res.step(state, std::vector<double>{5.0});
    const double m = max_region_pressure(state, cfg.areas[0]);
    CHECK(m >= prev - 1e-9);
    prev = m;
  }
}

TEST_CASE("lognormal permeability: deterministic, positive, median near the mean") {
  const auto k1 = lognormal_permeability(55, 16, 100.0, 0.5, 42);
  const auto k2 = lognormal_permeability(55, 16, 100.0, 0.5, 42);
  CHECK(k1 == k2);
  const auto k3 = lognormal_permeability(55, 16, 100.0, 0.5, 43);
  CHECK(k1 != k3);
  double log_mean = 0.0;
  for (double v : k1) {
    CHECK(v > 0.0);
    log_mean += std::log(v);
  }
  log_mean /= static_cast<double>(k1.size());
  CHECK(log_mean == doctest::Approx(std::log(100.0)).epsilon(0.02));
}

TEST_CASE("permeability CSV round-trips through the exchange format") {
  GridSpec g = uniform_grid(4, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> perm(10.0, 500.0);
  for (auto& k : g.permeability) k = perm(rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ccs_perm_test.csv").string();
  write_permeability_csv(path, g);
  const auto k = read_permeability_csv(path, 4, 3);
  CHECK(k == g.permeability);
  std::filesystem::remove(path);
}

TEST_CASE("config validation catches inconsistent setups") {
  EnvConfig cfg = small_env(4, 4);
  SUBCASE("well outside grid") {
    cfg.wells[0].i = 9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("overlapping areas") {
    cfg.areas.push_back(cfg.areas[0]);
    cfg.areas[1].owner = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("p_init above a threshold") {
    cfg.p_init = 61000.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("threshold above p_frac") {
    cfg.areas[0].p_threshold = 70000.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("porosity out of range") {
    cfg.grid.porosity = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}
