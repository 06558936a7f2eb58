#include <doctest.h>

#include <stdexcept>

#include <random>

#include "ccs/econ.hpp"

using namespace ccs;

namespace {

std::vector<WellSpec> three_wells() {
  return {
      {"I1", 0, 0, 0, WellKind::Injector, 0.0, 5.0},
      {"I2", 0, 1, 0, WellKind::Injector, 0.0, 5.0},
      {"E1", 0, 2, 0, WellKind::Extractor, 0.0, 5.0},
  };
}

}  // namespace

TEST_CASE("present_value: one injector at Table-1 prices earns 40 $M per MMTon-year") {
  const std::vector<WellSpec> wells{{"I1", 0, 0, 0, WellKind::Injector, 0.0, 5.0}};
  EconomicParams params;  // credit 85, op 45
  WellFlows flows;
  flows.co2 = {1.0};
  CHECK(present_value(0, flows, wells, params, 1.0) == doctest::Approx(40.0));
}

TEST_CASE("present_value: zero rates earn nothing") {
  const auto wells = three_wells();
  WellFlows flows;
  flows.co2 = {0.0, 0.0, 0.0};
  flows.water = {0.0, 0.0, 0.0};
  CHECK(present_value(0, flows, wells, EconomicParams{}, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("present_value: injectors plus a water-producing extractor") {
  const auto wells = three_wells();
  EconomicParams params;
  WellFlows flows;
  flows.co2 = {2.0, 3.0, 0.0};
  flows.water = {0.0, 0.0, 1.0};
  // 40*(2+3) - 30*1 = 170
  CHECK(present_value(0, flows, wells, params, 1.0) == doctest::Approx(170.0));
}

TEST_CASE("present_value: re-extracted CO2 is charged when priced") {
  const auto wells = three_wells();
  EconomicParams params;
  params.r_co2_reextract = 10.0;
  WellFlows flows;
  flows.co2 = {1.0, 0.0, -2.0};
  flows.water = {0.0, 0.0, 0.0};
  CHECK(present_value(0, flows, wells, params, 1.0) == doctest::Approx(40.0 - 20.0));
}

TEST_CASE("present_value is linear in the rate vector") {
  const auto wells = three_wells();
  EconomicParams params;
  params.r_co2_reextract = 7.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    WellFlows f1, f2, sum;
    f1.co2 = {uni(rng), uni(rng), -uni(rng)};
    f1.water = {0.0, 0.0, uni(rng)};
    f2.co2 = {uni(rng), uni(rng), -uni(rng)};
    f2.water = {0.0, 0.0, uni(rng)};
    sum.co2.resize(3);
    sum.water.resize(3);
    for (int w = 0; w < 3; ++w) {
      sum.co2[w] = f1.co2[w] + f2.co2[w];
      sum.water[w] = f1.water[w] + f2.water[w];
    }
    const double lhs = present_value(0, sum, wells, params, 1.0);
    const double rhs = present_value(0, f1, wells, params, 1.0) +
                       present_value(0, f2, wells, params, 1.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("npv: discounting starts at exponent one") {
  const std::vector<double> series{40.0, 40.0};
  CHECK(npv(series, 0.95) == doctest::Approx(74.1).epsilon(1e-12));
  CHECK(npv(std::vector<double>{}, 0.5) == doctest::Approx(0.0));
  CHECK(npv(std::vector<double>{0.0, 0.0, 0.0}, 0.9) == doctest::Approx(0.0));
}

TEST_CASE("npv: gamma outside (0,1) is rejected") {
  const std::vector<double> series{1.0};
  CHECK_THROWS_AS(npv(series, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(npv(series, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(npv(series, 1.2), std::invalid_argument);
  EconomicParams params;
  params.gamma = 1.2;
  CHECK_THROWS_AS(params.validate(), std::invalid_argument);
}

TEST_CASE("npv: discount bound holds on random series") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-100.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    std::vector<double> series(12);
    double max_abs = 0.0;
    for (auto& v : series) {
      v = uni(rng);
      max_abs = std::max(max_abs, std::abs(v));
    }
    const double bound = gamma * (1.0 - std::pow(gamma, 12.0)) / (1.0 - gamma) * max_abs;
    CHECK(std::abs(npv(series, gamma)) <= bound + 1e-9);
  }
}

namespace {

struct PenaltyWorld {
  GridSpec grid;
  std::vector<WellSpec> wells;
  std::vector<ProjectArea> areas;
  ReservoirState state;

  PenaltyWorld() {
    grid.nx = 4;
    grid.ny = 2;
    grid.dx = grid.dy = 800;
    grid.thickness = 200;
    grid.porosity = 0.2;
    grid.total_compressibility = 5e-7;
    grid.viscosity = 0.5;
    grid.permeability.assign(grid.cell_count(), 100.0);
    wells = {
        {"W0", 0, 0, 0, WellKind::Injector, 0.0, 5.0},
        {"W1", 0, 1, 0, WellKind::Injector, 0.0, 5.0},
    };
    ProjectArea area;
    area.owner = 0;
    area.cells = {0, 1, 2, 3};  // bottom row
    area.p_threshold = 55000.0;
    areas = {area};
    state.pressure.assign(grid.cell_count(), 20000.0);
  }
};

}  // namespace

TEST_CASE("penalty: two violating well blocks cost 10,000 in well mode") {
  PenaltyWorld w;
  w.state.pressure[0] = 56000.0;
  w.state.pressure[1] = 57000.0;
  PenaltyParams params;  // well mode, 5000
  CHECK(penalty(w.state, 0, w.areas, w.wells, w.grid, params) ==
        doctest::Approx(10000.0));
}

TEST_CASE("penalty: no violations cost nothing; threshold itself is not a violation") {
  PenaltyWorld w;
  PenaltyParams params;
  CHECK(penalty(w.state, 0, w.areas, w.wells, w.grid, params) == doctest::Approx(0.0));
  w.state.pressure[0] = 55000.0;  // exactly at threshold: strict inequality
  CHECK(penalty(w.state, 0, w.areas, w.wells, w.grid, params) == doctest::Approx(0.0));
}

TEST_CASE("penalty: three violating area cells cost 150 in region mode") {
  PenaltyWorld w;
  w.state.pressure[1] = 56000.0;
  w.state.pressure[2] = 58000.0;
  w.state.pressure[3] = 59000.0;
  PenaltyParams params;
  params.mode = PenaltyMode::Region;
  params.unit_penalty = PenaltyParams::default_unit_penalty(params.mode);
  CHECK(params.unit_penalty == doctest::Approx(50.0));
  CHECK(penalty(w.state, 0, w.areas, w.wells, w.grid, params) == doctest::Approx(150.0));
}

TEST_CASE("penalty: duplicate well cells count once") {
  PenaltyWorld w;
  w.wells.push_back({"W2", 0, 0, 0, WellKind::Injector, 0.0, 5.0});  // same cell as W0
  w.state.pressure[0] = 60000.0;
  PenaltyParams params;
  CHECK(penalty(w.state, 0, w.areas, w.wells, w.grid, params) == doctest::Approx(5000.0));
}

TEST_CASE("penalty: raising any cell never lowers the cost") {
  PenaltyWorld w;
  PenaltyParams well_mode;
  PenaltyParams region_mode;
  region_mode.mode = PenaltyMode::Region;
  region_mode.unit_penalty = 50.0;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(40000.0, 70000.0);
  for (int trial = 0; trial < 30; ++trial) {
    for (double& p : w.state.pressure) p = uni(rng);
    for (const auto& params : {well_mode, region_mode}) {
      const double before = penalty(w.state, 0, w.areas, w.wells, w.grid, params);
      ReservoirState raised = w.state;
      const int cell =
          std::uniform_int_distribution<int>(0, w.grid.cell_count() - 1)(rng);
      raised.pressure[cell] += 5000.0;
      CHECK(penalty(raised, 0, w.areas, w.wells, w.grid, params) >= before);
    }
  }
}

TEST_CASE("coalition_rewards: singletons, grand coalition, and pairs") {
  const std::vector<double> raw{1.0, 2.0, 3.0};
  const auto singles = coalition_rewards(raw, CoalitionStructure::singletons(3));
  CHECK(singles == std::vector<double>{1.0, 2.0, 3.0});

  const auto grand = coalition_rewards(raw, CoalitionStructure::grand(3));
  CHECK(grand == std::vector<double>{6.0, 6.0, 6.0});

  CoalitionStructure pair;
  pair.blocks = {{0, 1}, {2}};
  const auto shared = coalition_rewards(raw, pair);
  CHECK(shared == std::vector<double>{3.0, 3.0, 3.0});
}

TEST_CASE("coalition_rewards: malformed partitions are rejected") {
  const std::vector<double> raw{1.0, 2.0, 3.0};
  CoalitionStructure missing;
  missing.blocks = {{0, 1}};
  CHECK_THROWS_AS(coalition_rewards(raw, missing), std::invalid_argument);
  CoalitionStructure dup;
  dup.blocks = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(coalition_rewards(raw, dup), std::invalid_argument);
  CoalitionStructure empty_block;
  empty_block.blocks = {{0, 1, 2}, {}};
  CHECK_THROWS_AS(coalition_rewards(raw, empty_block), std::invalid_argument);
}

TEST_CASE("coalition_rewards: block totals conserve the raw total for every partition") {
  const std::vector<double> raw{1.5, -2.0, 4.25};
  double raw_total = 0.0;
  for (double v : raw) raw_total += v;
  for (const auto& partition : enumerate_partitions(3)) {
    const auto rewards = coalition_rewards(raw, partition);
    double block_total = 0.0;
    for (const auto& block : partition.blocks)
      block_total += rewards[block.front()];  // every member holds the block sum
    CHECK(block_total == doctest::Approx(raw_total).epsilon(1e-12));
  }
}

TEST_CASE("enumerate_partitions: Bell counts for n = 1..6") {
  const std::vector<std::size_t> bell{1, 2, 5, 15, 52, 203};
  for (int n = 1; n <= 6; ++n)
    CHECK(enumerate_partitions(n).size() == bell[n - 1]);
}

TEST_CASE("enumerate_partitions: canonical restricted-growth order for n = 3") {
  const auto partitions = enumerate_partitions(3);
  REQUIRE(partitions.size() == 5);
  // RGS order: 000, 001, 010, 011, 012
  CHECK(partitions[0].blocks == std::vector<std::vector<int>>{{0, 1, 2}});
  CHECK(partitions[1].blocks == std::vector<std::vector<int>>{{0, 1}, {2}});
  CHECK(partitions[2].blocks == std::vector<std::vector<int>>{{0, 2}, {1}});
  CHECK(partitions[3].blocks == std::vector<std::vector<int>>{{0}, {1, 2}});
  CHECK(partitions[4].blocks == std::vector<std::vector<int>>{{0}, {1}, {2}});
}

TEST_CASE("enumerate_partitions: out-of-range n is rejected") {
  CHECK_THROWS_AS(enumerate_partitions(0), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_partitions(11), std::invalid_argument);
  CHECK(enumerate_partitions(1).size() == 1);
}
