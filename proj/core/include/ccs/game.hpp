// Constrained Markov game assembly: wires the reservoir environment and the
// econ models into per-agent reward/cost streams and produces trajectories.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccs/econ.hpp"
#include "ccs/env.hpp"

namespace ccs {

struct CmgSpec {
  int n_agents = 0;
  EnvConfig env;
  EconomicParams econ;
  PenaltyParams penalty;
  CoalitionStructure coalition;
  int horizon = 25;            // control steps per episode
  double gamma = 0.95;
  double reward_scale = 0.01;  // learner reward = coalition PV ($M) * reward_scale
  double cost_scale = 1e-3;    // learner cost = raw penalty * cost_scale

  void validate() const;
};

struct Transition {
  std::vector<std::vector<double>> obs;       // per agent
  std::vector<std::vector<double>> actions;   // per agent, components in [-1,1]
  std::vector<double> rewards;                // per agent, scaled
  std::vector<double> costs;                  // per agent, scaled
  std::vector<std::vector<double>> next_obs;  // per agent
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::vector<std::vector<double>> pv;                 // [agent][t], raw $M
  std::vector<std::vector<double>> cost;               // [agent][t], raw penalty units
  std::vector<std::vector<double>> max_area_pressure;  // [agent][t], kPa after the step
};

// Affine action map: rate = rate_min + (a+1)/2 * (rate_max - rate_min),
// clamped to bounds; extractor wells get the negative sign convention.
// actions and wells must be aligned element-wise.
std::vector<double> action_to_rates(std::span<const double> actions,
                                    std::span<const WellSpec> wells);

// Deterministic policy: maps an agent's observation to actions in [-1,1],
// one per owned well.
using Policy = std::function<std::vector<double>(int agent, std::span<const double> obs)>;

// Optional exploration noise, added to the policy output before clipping.
using NoiseSource = std::function<void(int t, int agent, std::span<double> delta)>;

Trajectory run_episode(const CmgSpec& spec, const Reservoir& reservoir,
                       const Policy& policy, const NoiseSource& noise = nullptr);
Trajectory run_episode(const CmgSpec& spec, const Policy& policy,
                       const NoiseSource& noise = nullptr);

// sum_{t=1..T} gamma^t · series[t-1]; same exponent convention as npv().
double discounted_return(std::span<const double> series, double gamma);
double discounted_cost(std::span<const double> series, double gamma);

// CSV export: one row per (t, agent) with actions, rates, raw pv, raw cost,
// and the agent's max area pressure after the step.
void write_trajectory_csv(const std::string& path, const CmgSpec& spec,
                          const Trajectory& traj, const std::string& provenance = "");

}  // namespace ccs
