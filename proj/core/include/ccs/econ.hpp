// Reward and penalty models: per-step present value, discounted NPV,
// point-wise and region-wide pressure penalties, coalition reward sharing,
// and set-partition enumeration.
//
// Money flows in $M with rates in MMTon/yr and prices in $/ton:
// 1 MMTon/yr · 1 $/ton · 1 yr = 1 $M.

#pragma once

#include <span>
#include <vector>

#include "ccs/env.hpp"

namespace ccs {

struct EconomicParams {
  double r_credit = 85.0;         // $/ton CO₂ tax credit
  double r_op = 45.0;             // $/ton capture/transport/storage cost
  double r_water = 30.0;          // $/ton water disposal cost
  double r_co2_reextract = 0.0;   // $/ton re-extracted CO₂ handling cost
  double gamma = 0.95;            // discount factor, in (0,1)
  void validate() const;
};

enum class PenaltyMode { Well, Region };

struct PenaltyParams {
  PenaltyMode mode = PenaltyMode::Well;
  double unit_penalty = 5000.0;   // $ per violating block per step
  double d = 0.0;                 // allowable discounted cumulative cost per agent
  void validate() const;
  static double default_unit_penalty(PenaltyMode m) {
    return m == PenaltyMode::Well ? 5000.0 : 50.0;
  }
};

struct CoalitionStructure {
  std::vector<std::vector<int>> blocks;

  int n_agents() const;
  int block_of(int agent) const;
  void validate(int n_agents) const;  // pairwise disjoint, covers 0..n-1

  static CoalitionStructure singletons(int n);
  static CoalitionStructure grand(int n);
};

// Per-well flow bookkeeping for one control step: co2 is the signed CO₂ mass
// rate (injectors >= 0, extractors <= 0); water is the produced-water mass
// rate magnitude, meaningful for extractors only.
struct WellFlows {
  std::vector<double> co2;    // MMTon/yr, one per well
  std::vector<double> water;  // MMTon/yr, one per well (0 for injectors)
};

// Present value of one step for one agent, in $M:
//   sum_injectors (r_credit - r_op)·q + sum_extractors (-r_water·q_w - r_co2_reextract·|q_g|),
// all times dt (years).
double present_value(int agent, const WellFlows& flows,
                     std::span<const WellSpec> wells, const EconomicParams& params,
                     double dt);

// sum_{t=1..T} gamma^t · pv[t-1]  (discounting starts at exponent 1).
double npv(std::span<const double> pv_series, double gamma);

// Pressure-violation cost for one agent at one state, in penalty units:
// well mode counts the agent's distinct well cells with p > p_threshold,
// region mode counts the agent's area cells; strict inequality.
double penalty(const ReservoirState& state, int agent,
               std::span<const ProjectArea> areas, std::span<const WellSpec> wells,
               const GridSpec& grid, const PenaltyParams& params);

// Each agent receives the sum of raw values over its coalition block.
std::vector<double> coalition_rewards(std::span<const double> raw,
                                      const CoalitionStructure& structure);

// All set partitions of {0..n-1} in restricted-growth-string lexicographic
// order; the count is the n-th Bell number.
std::vector<CoalitionStructure> enumerate_partitions(int n);

}  // namespace ccs
