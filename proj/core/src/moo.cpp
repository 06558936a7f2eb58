#include "ccs/moo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace ccs::moo {

namespace {
void fail(const std::string& msg) { throw std::invalid_argument(msg); }
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void Nsga2Config::validate() const {
  if (population < 2 || population % 2 != 0) fail("moo: population must be even and >= 2");
  if (generations < 0) fail("moo: generations must be >= 0");
  if (crossover_prob < 0.0 || crossover_prob > 1.0) fail("moo: crossover_prob in [0,1]");
  if (mutation_prob > 1.0) fail("moo: mutation_prob must be <= 1");
  if (!(crossover_eta > 0.0) || !(mutation_eta > 0.0))
    fail("moo: distribution indices must be positive");
}

std::pair<std::vector<double>, double> evaluate_schedule(std::span<const double> genome,
                                                         const CmgSpec& spec,
                                                         const Reservoir& reservoir) {
  const auto& wells = reservoir.config().wells;
  const std::size_t n_wells = wells.size();
  if (genome.size() != n_wells * static_cast<std::size_t>(spec.horizon))
    fail("evaluate_schedule: genome length must be n_wells * horizon");

  std::vector<std::vector<double>> pv(spec.n_agents);
  double cv = 0.0;
  ReservoirState state = reservoir.initial_state();
  std::vector<double> rates(n_wells);
  WellFlows flows;
  flows.water.assign(n_wells, 0.0);
  for (int t = 0; t < spec.horizon; ++t) {
    for (std::size_t w = 0; w < n_wells; ++w) {
      const double mag = genome[static_cast<std::size_t>(t) * n_wells + w];
      rates[w] = wells[w].kind == WellKind::Extractor ? -mag : mag;
    }
    state = reservoir.step(state, rates);
    flows.co2 = rates;
    for (int a = 0; a < spec.n_agents; ++a)
      pv[a].push_back(present_value(a, flows, wells, spec.econ, spec.env.dt_step));
    for (const auto& area : spec.env.areas)
      for (int c : area.cells)
        cv += std::max(0.0, state.pressure[c] - area.p_threshold);
  }
  std::vector<double> npvs(spec.n_agents);
  for (int a = 0; a < spec.n_agents; ++a) npvs[a] = npv(pv[a], spec.gamma);
  return {std::move(npvs), cv};
}

namespace {

std::vector<double> block_objectives(const std::vector<double>& agent_npv,
                                     const CoalitionStructure& coalition) {
  std::vector<double> obj;
  obj.reserve(coalition.blocks.size());
  for (const auto& block : coalition.blocks) {
    double s = 0.0;
    for (int a : block) s += agent_npv[a];
    obj.push_back(s);
  }
  return obj;
}

}  // namespace

Problem schedule_problem(const CmgSpec& spec, const Reservoir& reservoir) {
  const auto& wells = reservoir.config().wells;
  Problem p;
  for (int t = 0; t < spec.horizon; ++t)
    for (const auto& w : wells) {
      p.lower.push_back(w.rate_min);
      p.upper.push_back(w.rate_max);
    }
  p.evaluate = [&spec, &reservoir](Individual& ind) {
    auto [npvs, cv] = evaluate_schedule(ind.genome, spec, reservoir);
    ind.objectives = block_objectives(npvs, spec.coalition);
    ind.agent_npv = std::move(npvs);
    ind.cv = cv;
  };
  return p;
}

Problem constant_rate_problem(const CmgSpec& spec, const Reservoir& reservoir) {
  const auto& wells = reservoir.config().wells;
  Problem p;
  for (const auto& w : wells) {
    p.lower.push_back(w.rate_min);
    p.upper.push_back(w.rate_max);
  }
  p.evaluate = [&spec, &reservoir, n_wells = wells.size()](Individual& ind) {
    std::vector<double> schedule(n_wells * static_cast<std::size_t>(spec.horizon));
    for (int t = 0; t < spec.horizon; ++t)
      std::copy(ind.genome.begin(), ind.genome.end(),
                schedule.begin() + static_cast<std::size_t>(t) * n_wells);
    auto [npvs, cv] = evaluate_schedule(schedule, spec, reservoir);
    ind.objectives = block_objectives(npvs, spec.coalition);
    ind.agent_npv = std::move(npvs);
    ind.cv = cv;
  };
  return p;
}

bool dominates(const Individual& a, const Individual& b) {
  if (a.feasible() != b.feasible()) return a.feasible();
  if (!a.feasible()) return a.cv < b.cv;
  if (a.objectives.size() != b.objectives.size())
    fail("dominates: objective arity mismatch");
  bool at_least_one_better = false;
  for (std::size_t k = 0; k < a.objectives.size(); ++k) {
    if (a.objectives[k] < b.objectives[k]) return false;
    if (a.objectives[k] > b.objectives[k]) at_least_one_better = true;
  }
  return at_least_one_better;
}

std::vector<std::vector<int>> fast_non_dominated_sort(std::vector<Individual>& pop) {
  if (pop.empty()) fail("fast_non_dominated_sort: empty population");
  const int n = static_cast<int>(pop.size());
  std::vector<std::vector<int>> dominated(n);
  std::vector<int> dom_count(n, 0);
  std::vector<std::vector<int>> fronts(1);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(pop[p], pop[q]))
        dominated[p].push_back(q);
      else if (dominates(pop[q], pop[p]))
        ++dom_count[p];
    }
    if (dom_count[p] == 0) {
      pop[p].rank = 0;
      fronts[0].push_back(p);
    }
  }
  int k = 0;
  while (!fronts[k].empty()) {
    std::vector<int> next;
    for (int p : fronts[k])
      for (int q : dominated[p])
        if (--dom_count[q] == 0) {
          pop[q].rank = k + 1;
          next.push_back(q);
        }
    fronts.push_back(std::move(next));
    ++k;
  }
  fronts.pop_back();
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<Individual>& pop,
                                      const std::vector<int>& front) {
  if (front.empty()) fail("crowding_distance: empty front");
  const int m = static_cast<int>(pop[front[0]].objectives.size());
  const int fs = static_cast<int>(front.size());
  std::vector<double> dist(fs, 0.0);
  if (fs <= 2) {
    std::fill(dist.begin(), dist.end(), kInf);
    return dist;
  }
  std::vector<int> order(fs);
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < fs; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pop[front[a]].objectives[k] < pop[front[b]].objectives[k];
    });
    dist[order.front()] = kInf;
    dist[order.back()] = kInf;
    const double range = pop[front[order.back()]].objectives[k] -
                         pop[front[order.front()]].objectives[k];
    if (range <= 0.0) continue;  // degenerate objective: contributes 0
    for (int i = 1; i + 1 < fs; ++i) {
      if (dist[order[i]] == kInf) continue;
      dist[order[i]] += (pop[front[order[i + 1]]].objectives[k] -
                         pop[front[order[i - 1]]].objectives[k]) /
                        range;
    }
  }
  return dist;
}

namespace {

// Crowded-comparison: lower rank wins, then larger crowding distance.
bool crowded_less(const Individual& a, const Individual& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.crowding > b.crowding;
}

int tournament(const std::vector<Individual>& pop, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(pop.size()) - 1);
  const int a = pick(rng);
  const int b = pick(rng);
  if (crowded_less(pop[a], pop[b])) return a;
  if (crowded_less(pop[b], pop[a])) return b;
  return a;
}

// Bounded simulated binary crossover (Deb & Agrawal).
void sbx(std::vector<double>& c1, std::vector<double>& c2, const Problem& prob,
         double eta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t k = 0; k < c1.size(); ++k) {
    if (uni(rng) > 0.5) continue;
    double y1 = c1[k], y2 = c2[k];
    if (std::abs(y1 - y2) < 1e-14) continue;
    if (y1 > y2) std::swap(y1, y2);
    const double yl = prob.lower[k], yu = prob.upper[k];
    const double rand = uni(rng);

    auto spread = [&](double beta) {
      const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
      if (rand <= 1.0 / alpha)
        return std::pow(rand * alpha, 1.0 / (eta + 1.0));
      return std::pow(1.0 / (2.0 - rand * alpha), 1.0 / (eta + 1.0));
    };

    double beta = 1.0 + 2.0 * (y1 - yl) / (y2 - y1);
    double betaq = spread(beta);
    double child1 = 0.5 * ((y1 + y2) - betaq * (y2 - y1));

    beta = 1.0 + 2.0 * (yu - y2) / (y2 - y1);
    betaq = spread(beta);
    double child2 = 0.5 * ((y1 + y2) + betaq * (y2 - y1));

    child1 = std::clamp(child1, yl, yu);
    child2 = std::clamp(child2, yl, yu);
    if (uni(rng) <= 0.5) std::swap(child1, child2);
    c1[k] = child1;
    c2[k] = child2;
  }
}

// Bounded polynomial mutation (Deb).
void polynomial_mutation(std::vector<double>& genome, const Problem& prob,
                         double prob_per_gene, double eta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t k = 0; k < genome.size(); ++k) {
    if (uni(rng) > prob_per_gene) continue;
    const double yl = prob.lower[k], yu = prob.upper[k];
    const double y = genome[k];
    const double delta1 = (y - yl) / (yu - yl);
    const double delta2 = (yu - y) / (yu - yl);
    const double rnd = uni(rng);
    const double mut_pow = 1.0 / (eta + 1.0);
    double deltaq;
    if (rnd <= 0.5) {
      const double xy = 1.0 - delta1;
      const double val = 2.0 * rnd + (1.0 - 2.0 * rnd) * std::pow(xy, eta + 1.0);
      deltaq = std::pow(val, mut_pow) - 1.0;
    } else {
      const double xy = 1.0 - delta2;
      const double val =
          2.0 * (1.0 - rnd) + 2.0 * (rnd - 0.5) * std::pow(xy, eta + 1.0);
      deltaq = 1.0 - std::pow(val, mut_pow);
    }
    genome[k] = std::clamp(y + deltaq * (yu - yl), yl, yu);
  }
}

// Evaluates individuals [begin, end) in parallel chunks; results are written
// by index so thread count does not affect the outcome.
void evaluate_all(std::vector<Individual>& pop, const Problem& prob) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n = pop.size();
  const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (n_threads <= 1) {
    for (auto& ind : pop) prob.evaluate(ind);
    return;
  }
  std::vector<std::thread> threads;
  std::size_t chunk = (n + n_threads - 1) / n_threads;
  for (unsigned t = 0; t < n_threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&pop, &prob, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) prob.evaluate(pop[i]);
    });
  }
  for (auto& th : threads) th.join();
}

void assign_rank_and_crowding(std::vector<Individual>& pop) {
  const auto fronts = fast_non_dominated_sort(pop);
  for (const auto& front : fronts) {
    const auto dist = crowding_distance(pop, front);
    for (std::size_t i = 0; i < front.size(); ++i) pop[front[i]].crowding = dist[i];
  }
}

}  // namespace

Nsga2Result nsga2_run(const Problem& problem, const Nsga2Config& cfg) {
  cfg.validate();
  if (problem.lower.size() != problem.upper.size() || problem.lower.empty())
    fail("nsga2_run: malformed bounds");
  const std::size_t dim = problem.lower.size();
  const double pm =
      cfg.mutation_prob < 0.0 ? 1.0 / static_cast<double>(dim) : cfg.mutation_prob;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<Individual> pop(cfg.population);
  for (auto& ind : pop) {
    ind.genome.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      ind.genome[k] =
          problem.lower[k] + uni(rng) * (problem.upper[k] - problem.lower[k]);
  }
  evaluate_all(pop, problem);
  assign_rank_and_crowding(pop);

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Individual> offspring;
    offspring.reserve(cfg.population);
    while (static_cast<int>(offspring.size()) < cfg.population) {
      const int p1 = tournament(pop, rng);
      const int p2 = tournament(pop, rng);
      Individual c1, c2;
      c1.genome = pop[p1].genome;
      c2.genome = pop[p2].genome;
      if (uni(rng) <= cfg.crossover_prob)
        sbx(c1.genome, c2.genome, problem, cfg.crossover_eta, rng);
      polynomial_mutation(c1.genome, problem, pm, cfg.mutation_eta, rng);
      polynomial_mutation(c2.genome, problem, pm, cfg.mutation_eta, rng);
      offspring.push_back(std::move(c1));
      if (static_cast<int>(offspring.size()) < cfg.population)
        offspring.push_back(std::move(c2));
    }
    evaluate_all(offspring, problem);

    std::vector<Individual> combined;
    combined.reserve(pop.size() + offspring.size());
    for (auto& ind : pop) combined.push_back(std::move(ind));
    for (auto& ind : offspring) combined.push_back(std::move(ind));
    const auto fronts = fast_non_dominated_sort(combined);

    std::vector<Individual> next;
    next.reserve(cfg.population);
    for (const auto& front : fronts) {
      const auto dist = crowding_distance(combined, front);
      for (std::size_t i = 0; i < front.size(); ++i) combined[front[i]].crowding = dist[i];
      if (next.size() + front.size() <= static_cast<std::size_t>(cfg.population)) {
        for (int idx : front) next.push_back(std::move(combined[idx]));
      } else {
        std::vector<int> order(front.begin(), front.end());
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return combined[a].crowding > combined[b].crowding;
        });
        for (int idx : order) {
          if (next.size() == static_cast<std::size_t>(cfg.population)) break;
          next.push_back(std::move(combined[idx]));
        }
        break;
      }
    }
    pop = std::move(next);
    assign_rank_and_crowding(pop);
  }

  Nsga2Result result;
  const auto fronts = fast_non_dominated_sort(pop);
  for (int idx : fronts[0])
    if (pop[idx].feasible()) result.first_front.push_back(pop[idx]);
  result.population = std::move(pop);
  return result;
}

const Individual& select_solution(const std::vector<Individual>& front,
                                  SelectionMode mode, int favored_objective) {
  if (front.empty()) fail("select_solution: empty front");
  if (mode == SelectionMode::Favor) {
    const auto it = std::max_element(
        front.begin(), front.end(), [&](const Individual& a, const Individual& b) {
          return a.objectives[favored_objective] < b.objectives[favored_objective];
        });
    return *it;
  }
  const int m = static_cast<int>(front[0].objectives.size());
  std::vector<double> lo(m, kInf), hi(m, -kInf);
  for (const auto& ind : front)
    for (int k = 0; k < m; ++k) {
      lo[k] = std::min(lo[k], ind.objectives[k]);
      hi[k] = std::max(hi[k], ind.objectives[k]);
    }
  double best_d = kInf;
  const Individual* best = &front[0];
  for (const auto& ind : front) {
    double d = 0.0;
    for (int k = 0; k < m; ++k) {
      const double range = hi[k] - lo[k];
      const double norm = range > 0.0 ? (ind.objectives[k] - lo[k]) / range : 1.0;
      d += (1.0 - norm) * (1.0 - norm);
    }
    d = std::sqrt(d);
    if (d < best_d) {
      best_d = d;
      best = &ind;
    }
  }
  return *best;
}

void write_front_csv(const std::string& path, const std::vector<Individual>& front,
                     int n_agents, const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_front_csv: cannot open " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "id";
  for (int a = 0; a < n_agents; ++a) out << ",npv_" << static_cast<char>('A' + a);
  out << ",cv\n";
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < front.size(); ++i) {
    out << i;
    for (int a = 0; a < n_agents; ++a) out << "," << num(front[i].agent_npv[a]);
    out << "," << num(front[i].cv) << "\n";
  }
}

}  // namespace ccs::moo
