// Constrained NSGA-II over full injection-rate schedules: non-dominated
// sorting with the feasibility rule, crowding distance, simulated binary
// crossover, polynomial mutation, elitist environmental selection.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccs/game.hpp"

namespace ccs::moo {

struct Individual {
  std::vector<double> genome;      // decision vector within bounds
  std::vector<double> objectives;  // maximized
  std::vector<double> agent_npv;   // per agent, $M (reporting)
  double cv = 0.0;                 // aggregate constraint violation, kPa·cells
  int rank = 0;
  double crowding = 0.0;

  bool feasible() const { return cv == 0.0; }
};

struct Nsga2Config {
  int population = 100;  // must be even
  int generations = 200;
  double crossover_prob = 0.9;
  double crossover_eta = 15.0;
  double mutation_prob = -1.0;  // <0 means 1/genome_length
  double mutation_eta = 20.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// A box-bounded problem; evaluate fills objectives, agent_npv and cv for the
// genome already stored in the individual. Must be pure and thread-safe.
struct Problem {
  std::vector<double> lower;
  std::vector<double> upper;
  std::function<void(Individual&)> evaluate;
};

// Genome = per-well per-step rates, genome[t * n_wells + w], MMTon/yr
// magnitudes. Objectives are coalition-block NPV sums (singleton blocks give
// one objective per agent, the grand coalition one total objective);
// cv sums max(0, p - p_threshold) over all areas, cells, and steps.
Problem schedule_problem(const CmgSpec& spec, const Reservoir& reservoir);

// Genome = one constant rate per well, expanded over the horizon.
Problem constant_rate_problem(const CmgSpec& spec, const Reservoir& reservoir);

// Evaluates one full schedule; returns (per-agent NPVs, cv).
std::pair<std::vector<double>, double> evaluate_schedule(std::span<const double> genome,
                                                         const CmgSpec& spec,
                                                         const Reservoir& reservoir);

// Deb constrained domination, maximizing objectives.
bool dominates(const Individual& a, const Individual& b);

// Fronts of indices; F1 is the non-dominated set. Also writes rank fields.
std::vector<std::vector<int>> fast_non_dominated_sort(std::vector<Individual>& pop);

// Per-objective normalized neighbor gaps; boundary individuals get +inf.
std::vector<double> crowding_distance(const std::vector<Individual>& pop,
                                      const std::vector<int>& front);

struct Nsga2Result {
  std::vector<Individual> population;
  std::vector<Individual> first_front;  // feasible members of F1
};

Nsga2Result nsga2_run(const Problem& problem, const Nsga2Config& cfg);

enum class SelectionMode { Knee, Favor };

// knee: minimum Euclidean distance to the per-objective min-max normalized
// ideal point; favor: argmax of the given objective.
const Individual& select_solution(const std::vector<Individual>& front,
                                  SelectionMode mode, int favored_objective = 0);

void write_front_csv(const std::string& path, const std::vector<Individual>& front,
                     int n_agents, const std::string& provenance = "");

}  // namespace ccs::moo
