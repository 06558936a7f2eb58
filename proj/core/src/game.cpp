#include "ccs/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ccs {

void CmgSpec::validate() const {
  env.validate();
  econ.validate();
  penalty.validate();
  if (n_agents < 1) throw std::invalid_argument("game: n_agents must be >= 1");
  if (env.n_agents() > n_agents)
    throw std::invalid_argument("game: every well/area owner must be < n_agents");
  coalition.validate(n_agents);
  if (horizon < 1) throw std::invalid_argument("game: horizon must be >= 1");
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("game: gamma must be in (0,1)");
  if (!(reward_scale > 0.0) || !(cost_scale > 0.0))
    throw std::invalid_argument("game: reward_scale and cost_scale must be positive");
  for (int agent = 0; agent < n_agents; ++agent) {
    bool has_well = false, has_area = false;
    for (const auto& w : env.wells) has_well |= (w.owner == agent);
    for (const auto& a : env.areas) has_area |= (a.owner == agent);
    if (!has_well || !has_area)
      throw std::invalid_argument("game: every agent needs a well and a project area");
  }
}

std::vector<double> action_to_rates(std::span<const double> actions,
                                    std::span<const WellSpec> wells) {
  if (actions.size() != wells.size())
    throw std::invalid_argument("action_to_rates: one action per well required");
  std::vector<double> rates(wells.size());
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const auto& well = wells[w];
    double r = well.rate_min + (actions[w] + 1.0) / 2.0 * (well.rate_max - well.rate_min);
    r = std::clamp(r, well.rate_min, well.rate_max);
    rates[w] = well.kind == WellKind::Extractor ? -r : r;
  }
  return rates;
}

Trajectory run_episode(const CmgSpec& spec, const Reservoir& reservoir,
                       const Policy& policy, const NoiseSource& noise) {
  const int n = spec.n_agents;
  const auto& wells = reservoir.config().wells;

  Trajectory traj;
  traj.pv.assign(n, {});
  traj.cost.assign(n, {});
  traj.max_area_pressure.assign(n, {});

  ReservoirState state = reservoir.initial_state();
  std::vector<std::vector<double>> obs(n);
  for (int a = 0; a < n; ++a) obs[a] = reservoir.observe(state, a, spec.horizon);

  std::vector<double> joint_rates(wells.size(), 0.0);
  for (int t = 1; t <= spec.horizon; ++t) {
    Transition tr;
    tr.obs = obs;
    tr.actions.resize(n);
    for (int a = 0; a < n; ++a) {
      std::vector<double> act = policy(a, obs[a]);
      const auto& own = reservoir.wells_of(a);
      if (act.size() != own.size())
        throw std::invalid_argument("run_episode: policy must emit one action per owned well");
      if (noise) noise(t, a, act);
      for (double& v : act) v = std::clamp(v, -1.0, 1.0);
      tr.actions[a] = std::move(act);
    }

    for (int a = 0; a < n; ++a) {
      const auto& own = reservoir.wells_of(a);
      std::vector<WellSpec> own_specs;
      own_specs.reserve(own.size());
      for (int w : own) own_specs.push_back(wells[w]);
      const std::vector<double> own_rates = action_to_rates(tr.actions[a], own_specs);
      for (std::size_t k = 0; k < own.size(); ++k) joint_rates[own[k]] = own_rates[k];
    }

    state = reservoir.step(state, joint_rates);

    WellFlows flows;
    flows.co2 = joint_rates;
    flows.water.assign(wells.size(), 0.0);
    std::vector<double> raw_pv(n), raw_cost(n);
    for (int a = 0; a < n; ++a) {
      raw_pv[a] = present_value(a, flows, wells, spec.econ, spec.env.dt_step);
      raw_cost[a] = penalty(state, a, spec.env.areas, wells, spec.env.grid, spec.penalty);
      traj.pv[a].push_back(raw_pv[a]);
      traj.cost[a].push_back(raw_cost[a]);
      traj.max_area_pressure[a].push_back(
          max_region_pressure(state, reservoir.area_of(a)));
    }

    const std::vector<double> shared = coalition_rewards(raw_pv, spec.coalition);
    tr.rewards.resize(n);
    tr.costs.resize(n);
    for (int a = 0; a < n; ++a) {
      tr.rewards[a] = shared[a] * spec.reward_scale;
      tr.costs[a] = raw_cost[a] * spec.cost_scale;
    }

    tr.next_obs.resize(n);
    for (int a = 0; a < n; ++a) tr.next_obs[a] = reservoir.observe(state, a, spec.horizon);
    tr.done = (t == spec.horizon);
    obs = tr.next_obs;
    traj.steps.push_back(std::move(tr));
  }
  return traj;
}

Trajectory run_episode(const CmgSpec& spec, const Policy& policy,
                       const NoiseSource& noise) {
  spec.validate();
  Reservoir reservoir(spec.env);
  return run_episode(spec, reservoir, policy, noise);
}

double discounted_return(std::span<const double> series, double gamma) {
  return npv(series, gamma);
}

double discounted_cost(std::span<const double> series, double gamma) {
  return npv(series, gamma);
}

void write_trajectory_csv(const std::string& path, const CmgSpec& spec,
                          const Trajectory& traj, const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";

  std::size_t max_wells = 0;
  std::vector<std::vector<WellSpec>> own_specs(spec.n_agents);
  for (const auto& w : spec.env.wells) own_specs[w.owner].push_back(w);
  for (const auto& ws : own_specs) max_wells = std::max(max_wells, ws.size());

  out << "t,agent";
  for (std::size_t k = 0; k < max_wells; ++k) out << ",action" << k;
  for (std::size_t k = 0; k < max_wells; ++k) out << ",rate" << k;
  out << ",pv,cost,max_area_pressure\n";

  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    for (int a = 0; a < spec.n_agents; ++a) {
      const auto& actions = traj.steps[s].actions[a];
      const auto rates = action_to_rates(actions, own_specs[a]);
      out << (s + 1) << "," << a;
      for (std::size_t k = 0; k < max_wells; ++k)
        out << "," << (k < actions.size() ? num(actions[k]) : "");
      for (std::size_t k = 0; k < max_wells; ++k)
        out << "," << (k < rates.size() ? num(rates[k]) : "");
      out << "," << num(traj.pv[a][s]) << "," << num(traj.cost[a][s]) << ","
          << num(traj.max_area_pressure[a][s]) << "\n";
    }
  }
}

}  // namespace ccs
