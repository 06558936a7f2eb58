#include "ccs/econ.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ccs {

namespace {
void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

void EconomicParams::validate() const {
  if (!(gamma > 0.0) || !(gamma < 1.0)) fail("econ: gamma must be in (0,1)");
  if (r_credit < 0.0 || r_op < 0.0 || r_water < 0.0 || r_co2_reextract < 0.0)
    fail("econ: prices must be >= 0");
}

void PenaltyParams::validate() const {
  if (!(unit_penalty > 0.0)) fail("penalty: unit_penalty must be positive");
  if (d < 0.0) fail("penalty: d must be >= 0");
}

int CoalitionStructure::n_agents() const {
  int n = 0;
  for (const auto& b : blocks)
    for (int a : b) n = std::max(n, a + 1);
  return n;
}

int CoalitionStructure::block_of(int agent) const {
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
    for (int a : blocks[b])
      if (a == agent) return b;
  fail("coalition: agent not in any block");
  return -1;
}

void CoalitionStructure::validate(int n) const {
  std::vector<char> seen(n, 0);
  int covered = 0;
  for (const auto& b : blocks) {
    if (b.empty()) fail("coalition: blocks must be non-empty");
    for (int a : b) {
      if (a < 0 || a >= n) fail("coalition: agent index out of range");
      if (seen[a]) fail("coalition: blocks must be pairwise disjoint");
      seen[a] = 1;
      ++covered;
    }
  }
  if (covered != n) fail("coalition: blocks must cover all agents");
}

CoalitionStructure CoalitionStructure::singletons(int n) {
  CoalitionStructure s;
  for (int a = 0; a < n; ++a) s.blocks.push_back({a});
  return s;
}

CoalitionStructure CoalitionStructure::grand(int n) {
  CoalitionStructure s;
  s.blocks.emplace_back();
  for (int a = 0; a < n; ++a) s.blocks[0].push_back(a);
  return s;
}

double present_value(int agent, const WellFlows& flows,
                     std::span<const WellSpec> wells, const EconomicParams& params,
                     double dt) {
  if (flows.co2.size() != wells.size())
    fail("present_value: one co2 rate per well required");
  double pv = 0.0;
  for (std::size_t w = 0; w < wells.size(); ++w) {
    if (wells[w].owner != agent) continue;
    if (wells[w].kind == WellKind::Injector) {
      pv += (params.r_credit - params.r_op) * flows.co2[w];
    } else {
      const double water = w < flows.water.size() ? flows.water[w] : 0.0;
      pv += -params.r_water * water - params.r_co2_reextract * std::abs(flows.co2[w]);
    }
  }
  return pv * dt;
}

double npv(std::span<const double> pv_series, double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) fail("npv: gamma must be in (0,1)");
  double value = 0.0;
  double disc = 1.0;
  for (double pv : pv_series) {
    disc *= gamma;
    value += disc * pv;
  }
  return value;
}

double penalty(const ReservoirState& state, int agent,
               std::span<const ProjectArea> areas, std::span<const WellSpec> wells,
               const GridSpec& grid, const PenaltyParams& params) {
  const ProjectArea* own = nullptr;
  for (const auto& a : areas)
    if (a.owner == agent) own = &a;
  if (own == nullptr) fail("penalty: agent has no project area");

  int violating = 0;
  if (params.mode == PenaltyMode::Well) {
    std::set<int> own_cells;
    for (const auto& w : wells)
      if (w.owner == agent) own_cells.insert(grid.index(w.i, w.j));
    if (own_cells.empty()) fail("penalty: agent has no wells");
    for (int c : own_cells)
      if (state.pressure[c] > own->p_threshold) ++violating;
  } else {
    for (int c : own->cells)
      if (state.pressure[c] > own->p_threshold) ++violating;
  }
  return params.unit_penalty * violating;
}

std::vector<double> coalition_rewards(std::span<const double> raw,
                                      const CoalitionStructure& structure) {
  const int n = static_cast<int>(raw.size());
  structure.validate(n);
  std::vector<double> out(n, 0.0);
  for (const auto& block : structure.blocks) {
    double sum = 0.0;
    for (int a : block) sum += raw[a];
    for (int a : block) out[a] = sum;
  }
  return out;
}

std::vector<CoalitionStructure> enumerate_partitions(int n) {
  if (n < 1 || n > 10) fail("enumerate_partitions: n must be in [1,10]");
  std::vector<CoalitionStructure> out;
  // Restricted growth strings: a[0]=0, a[i] <= 1 + max(a[0..i-1]); lexicographic
  // enumeration by recursion over positions.
  std::vector<int> a(n, 0);
  const auto emit = [&] {
    CoalitionStructure s;
    const int n_blocks = *std::max_element(a.begin(), a.end()) + 1;
    s.blocks.assign(n_blocks, {});
    for (int i = 0; i < n; ++i) s.blocks[a[i]].push_back(i);
    out.push_back(std::move(s));
  };
  const auto recurse = [&](auto&& self, int pos, int max_so_far) -> void {
    if (pos == n) {
      emit();
      return;
    }
    for (int v = 0; v <= max_so_far + 1; ++v) {
      a[pos] = v;
      self(self, pos + 1, std::max(max_so_far, v));
    }
  };
  recurse(recurse, 1, 0);
  return out;
}

}  // namespace ccs
