// Command-line harness: training, evaluation, NSGA-II baseline, random-rate
// baseline, coalition enumeration, and environment self-checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccs/config.hpp"
#include "ccs/io.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string scenario;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "experiment config JSON");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--scenario", opts.scenario,
                  "scenario preset: comp-well | coop-well | comp-region | coop-region");
  cmd->add_option("--seed", opts.seed, "single seed (overrides the config seed list)");
}

ccs::cfg::ExperimentConfig resolve_config(const CommonOptions& opts) {
  ccs::cfg::ExperimentConfig config = ccs::cfg::load_config(opts.config_path);
  if (!opts.scenario.empty()) ccs::cfg::apply_scenario(config, opts.scenario);
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.seed >= 0) config.seeds = {static_cast<std::uint64_t>(opts.seed)};
  return config;
}

std::string run_dir(const ccs::cfg::ExperimentConfig& config, std::uint64_t seed) {
  return config.out_dir + "/" + config.scenario + "/seed" + std::to_string(seed);
}

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "config_hash=" + hash + " seed=" + std::to_string(seed);
}

ccs::cfg::RunSummary summary_from_eval(const ccs::rl::EvalReport& rep,
                                       const ccs::cfg::ExperimentConfig& config,
                                       std::uint64_t seed, double wall_seconds,
                                       bool best_found, int best_episode) {
  ccs::cfg::RunSummary s;
  s.scenario = config.scenario;
  s.seed = seed;
  s.config_hash = ccs::cfg::config_hash(config);
  s.agent_npv = rep.npv;
  s.total_npv = rep.total_npv;
  s.discounted_cost = rep.discounted_cost;
  s.stage_years = rep.stage_years;
  s.stage_max_area_pressure = rep.stage_max_area_pressure;
  s.wall_clock_seconds = wall_seconds;
  s.best_found = best_found;
  s.best_episode = best_episode;
  return s;
}

int run_train_one_seed(const ccs::cfg::ExperimentConfig& config, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  const ccs::CmgSpec spec = config.make_cmg();
  ccs::rl::TrainConfig tc = config.train;
  tc.seed = seed;

  const ccs::rl::TrainResult result = ccs::rl::train(spec, tc);
  const std::string dir = run_dir(config, seed);
  ccs::io::ensure_directory(dir);
  const std::string hash = ccs::cfg::config_hash(config);

  {
    std::ostringstream ss;
    ss << dir << "/metrics.csv";
    ccs::rl::write_metrics_csv(ss.str(), result.log, provenance_line(hash, seed));
  }
  ccs::cfg::save_config(config, dir + "/config.json");

  const auto& learners = result.best.found ? result.best.learners : result.learners;
  ccs::rl::EvalReport eval = result.best.found
                                 ? result.best.eval
                                 : ccs::rl::evaluate(
                                       [&] {
                                         std::vector<ccs::nn::Mlp> actors;
                                         for (const auto& l : learners)
                                           actors.push_back(l.actor);
                                         return actors;
                                       }(),
                                       spec, tc.eval_episodes);

  json manifest{
      {"schema_version", 1},
      {"scenario", config.scenario},
      {"seed", seed},
      {"config_hash", hash},
      {"n_agents", spec.n_agents},
      {"episodes_trained", tc.episodes},
      {"best_found", result.best.found},
      {"best_episode", result.best.episode},
      {"team_pv", result.best.team_pv},
      {"agent_npv", eval.npv},
      {"discounted_cost", eval.discounted_cost},
  };
  ccs::cfg::save_checkpoints(learners, dir, manifest);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  ccs::cfg::save_summary(
      summary_from_eval(eval, config, seed, wall, result.best.found, result.best.episode),
      dir + "/summary.json");

  std::ostringstream line;
  line << "seed " << seed << ": ";
  if (result.best.found)
    line << "best episode " << result.best.episode;
  else
    line << "no zero-cost policy found; saved final learners";
  line << ", total NPV " << eval.total_npv << " $M, discounted costs [";
  for (std::size_t a = 0; a < eval.discounted_cost.size(); ++a)
    line << (a ? "," : "") << eval.discounted_cost[a];
  line << "]";
  std::cout << line.str() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& opts, int jobs) {
  const ccs::cfg::ExperimentConfig config = resolve_config(opts);
  const int n_jobs = std::max(1, jobs);
  std::vector<std::future<int>> futures;
  std::size_t next = 0;
  int rc = 0;
  while (next < config.seeds.size() || !futures.empty()) {
    while (next < config.seeds.size() && static_cast<int>(futures.size()) < n_jobs) {
      const std::uint64_t seed = config.seeds[next++];
      futures.push_back(std::async(std::launch::async,
                                   [&config, seed] { return run_train_one_seed(config, seed); }));
    }
    rc |= futures.front().get();
    futures.erase(futures.begin());
  }
  return rc;
}

int cmd_eval(const CommonOptions& opts) {
  const ccs::cfg::ExperimentConfig config = resolve_config(opts);
  const ccs::CmgSpec spec = config.make_cmg();
  int rc = 0;
  for (const std::uint64_t seed : config.seeds) {
    const std::string dir = run_dir(config, seed);
    const json manifest = ccs::cfg::load_manifest(dir);
    const auto learners = ccs::cfg::load_checkpoints(dir, spec.n_agents);
    std::vector<ccs::nn::Mlp> actors;
    for (const auto& l : learners) actors.push_back(l.actor);

    const auto started = std::chrono::steady_clock::now();
    ccs::Reservoir reservoir(spec.env);
    const ccs::rl::EvalReport rep =
        ccs::rl::evaluate(actors, spec, reservoir, config.train.eval_episodes);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    ccs::cfg::save_summary(
        summary_from_eval(rep, config, seed, wall, manifest.value("best_found", false),
                          manifest.value("best_episode", -1)),
        dir + "/eval_summary.json");
    ccs::write_trajectory_csv(dir + "/trajectory.csv", spec, rep.trajectory,
                              provenance_line(ccs::cfg::config_hash(config), seed));

    // Pressure snapshots at the reporting stages.
    {
      ccs::ReservoirState state = reservoir.initial_state();
      std::vector<double> joint_rates(spec.env.wells.size(), 0.0);
      std::vector<std::vector<ccs::WellSpec>> own(spec.n_agents);
      for (const auto& w : spec.env.wells) own[w.owner].push_back(w);
      for (int t = 1; t <= spec.horizon; ++t) {
        for (int a = 0; a < spec.n_agents; ++a) {
          const auto rates =
              ccs::action_to_rates(rep.trajectory.steps[t - 1].actions[a], own[a]);
          const auto& idx = reservoir.wells_of(a);
          for (std::size_t k = 0; k < idx.size(); ++k) joint_rates[idx[k]] = rates[k];
        }
        state = reservoir.step(state, joint_rates);
        if (std::find(rep.stage_years.begin(), rep.stage_years.end(), t) !=
            rep.stage_years.end())
          ccs::write_pressure_csv(dir + "/pressure_y" + std::to_string(t) + ".csv",
                                  spec.env.grid, state);
      }
    }

    const auto recorded = manifest.at("agent_npv").get<std::vector<double>>();
    bool match = recorded.size() == rep.npv.size();
    for (std::size_t a = 0; match && a < recorded.size(); ++a)
      match = (recorded[a] == rep.npv[a]);
    std::cout << "seed " << seed << ": total NPV " << rep.total_npv
              << " $M, checkpoint NPVs " << (match ? "reproduced" : "MISMATCH") << "\n";
    if (!match) rc = 1;
  }
  return rc;
}

int cmd_moo(const CommonOptions& opts) {
  const ccs::cfg::ExperimentConfig config = resolve_config(opts);
  const ccs::CmgSpec spec = config.make_cmg();
  const ccs::Reservoir reservoir(spec.env);
  const ccs::moo::Problem problem = ccs::moo::schedule_problem(spec, reservoir);

  int rc = 0;
  for (const std::uint64_t seed : config.seeds) {
    ccs::moo::Nsga2Config mc = config.moo;
    mc.seed = seed;
    const auto started = std::chrono::steady_clock::now();
    const ccs::moo::Nsga2Result result = ccs::moo::nsga2_run(problem, mc);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const std::string dir = run_dir(config, seed);
    ccs::io::ensure_directory(dir);
    const std::string hash = ccs::cfg::config_hash(config);
    ccs::moo::write_front_csv(dir + "/front.csv", result.first_front, spec.n_agents,
                              provenance_line(hash, seed));

    json selected = json::object();
    selected["schema_version"] = 1;
    selected["scenario"] = config.scenario;
    selected["seed"] = seed;
    selected["config_hash"] = hash;
    selected["wall_clock_seconds"] = wall;
    selected["front_size"] = result.first_front.size();
    if (!result.first_front.empty()) {
      const auto pack = [&](const ccs::moo::Individual& ind) {
        return json{{"agent_npv", ind.agent_npv},
                    {"objectives", ind.objectives},
                    {"cv", ind.cv},
                    {"schedule", ind.genome}};
      };
      selected["knee"] =
          pack(ccs::moo::select_solution(result.first_front, ccs::moo::SelectionMode::Knee));
      if (result.first_front[0].objectives.size() > 1) {
        for (std::size_t k = 0; k < result.first_front[0].objectives.size(); ++k)
          selected["favor_" + std::string(1, static_cast<char>('A' + k))] =
              pack(ccs::moo::select_solution(result.first_front,
                                             ccs::moo::SelectionMode::Favor,
                                             static_cast<int>(k)));
      }
      const auto& knee =
          ccs::moo::select_solution(result.first_front, ccs::moo::SelectionMode::Knee);
      double total = 0.0;
      for (double v : knee.agent_npv) total += v;
      std::cout << "seed " << seed << ": front size " << result.first_front.size()
                << ", knee total NPV " << total << " $M\n";
    } else {
      std::cout << "seed " << seed << ": no feasible front member found\n";
      rc = 1;
    }
    ccs::io::atomic_write(dir + "/selected.json", selected.dump(2) + "\n");
  }
  return rc;
}

int cmd_baseline_random(const CommonOptions& opts, int episodes) {
  const ccs::cfg::ExperimentConfig config = resolve_config(opts);
  const ccs::CmgSpec spec = config.make_cmg();
  const ccs::Reservoir reservoir(spec.env);
  const std::uint64_t seed = config.seeds.front();
  std::mt19937_64 rng(seed);

  const std::string dir = run_dir(config, seed);
  ccs::io::ensure_directory(dir);
  const std::string hash = ccs::cfg::config_hash(config);

  std::ostringstream csv;
  csv << "# " << provenance_line(hash, seed) << "\n";
  csv << "episode,exceeded,team_pv";
  for (int a = 0; a < spec.n_agents; ++a) csv << ",cost_" << static_cast<char>('A' + a);
  csv << "\n";

  int exceeded_count = 0;
  for (int e = 0; e < episodes; ++e) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const ccs::Policy policy = [&](int agent, std::span<const double>) {
      std::vector<double> a(reservoir.wells_of(agent).size());
      for (double& v : a) v = uni(rng);
      return a;
    };
    const ccs::Trajectory traj = ccs::run_episode(spec, reservoir, policy);
    double team_pv = 0.0;
    std::vector<double> costs(spec.n_agents, 0.0);
    bool exceeded = false;
    for (int a = 0; a < spec.n_agents; ++a) {
      for (double pv : traj.pv[a]) team_pv += pv;
      for (double c : traj.cost[a]) costs[a] += c;
      const double thr = reservoir.area_of(a).p_threshold;
      for (double p : traj.max_area_pressure[a]) exceeded |= (p > thr);
    }
    exceeded_count += exceeded ? 1 : 0;
    csv << (e + 1) << "," << (exceeded ? 1 : 0) << "," << ccs::io::format_double(team_pv);
    for (int a = 0; a < spec.n_agents; ++a)
      csv << "," << ccs::io::format_double(costs[a]);
    csv << "\n";
    if (e == 0)
      ccs::write_trajectory_csv(dir + "/baseline_trajectory.csv", spec, traj,
                                provenance_line(hash, seed));
  }
  ccs::io::atomic_write(dir + "/baseline.csv", csv.str());

  const double frac = static_cast<double>(exceeded_count) / episodes;
  std::cout << "random baseline: " << exceeded_count << "/" << episodes
            << " episodes exceeded a pressure threshold (" << 100.0 * frac << "%)\n";
  return 0;
}

int cmd_enumerate(int n) {
  const auto partitions = ccs::enumerate_partitions(n);
  for (const auto& p : partitions) {
    std::ostringstream line;
    for (const auto& block : p.blocks) {
      line << "{";
      for (std::size_t k = 0; k < block.size(); ++k)
        line << (k ? "," : "") << static_cast<char>('A' + block[k]);
      line << "}";
    }
    std::cout << line.str() << "\n";
  }
  std::cout << "Bell(" << n << ") = " << partitions.size() << "\n";
  return 0;
}

// Dense Gaussian-elimination solve, independent of the CG path.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

int cmd_env_check(const CommonOptions& opts) {
  const ccs::cfg::ExperimentConfig config = resolve_config(opts);
  const ccs::CmgSpec spec = config.make_cmg();
  const ccs::Reservoir reservoir(spec.env);
  int failures = 0;
  const auto report = [&failures](const std::string& name, bool ok,
                                  const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  const auto max_rates = [&] {
    std::vector<double> r(spec.env.wells.size());
    for (std::size_t w = 0; w < r.size(); ++w) {
      const auto& well = spec.env.wells[w];
      r[w] = well.kind == ccs::WellKind::Extractor ? -well.rate_max : well.rate_max;
    }
    return r;
  }();

  {  // determinism
    const auto s1 = reservoir.step(reservoir.initial_state(), max_rates);
    const auto s2 = reservoir.step(reservoir.initial_state(), max_rates);
    report("determinism: identical inputs give bit-identical states",
           s1.pressure == s2.pressure, "");
  }
  {  // superposition of deviations from the zero-rate step
    std::vector<double> q1(max_rates.size(), 0.0), q2(max_rates.size(), 0.0);
    for (std::size_t w = 0; w < max_rates.size(); ++w) {
      if (w % 2 == 0)
        q1[w] = max_rates[w];
      else
        q2[w] = 0.5 * max_rates[w];
    }
    std::vector<double> q12(max_rates.size());
    for (std::size_t w = 0; w < q12.size(); ++w) q12[w] = q1[w] + q2[w];
    const auto base = reservoir.step(reservoir.initial_state(), std::vector<double>(max_rates.size(), 0.0));
    const auto s1 = reservoir.step(reservoir.initial_state(), q1);
    const auto s2 = reservoir.step(reservoir.initial_state(), q2);
    const auto s12 = reservoir.step(reservoir.initial_state(), q12);
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < base.pressure.size(); ++c) {
      const double lhs = s12.pressure[c] - base.pressure[c];
      const double rhs = (s1.pressure[c] - base.pressure[c]) +
                         (s2.pressure[c] - base.pressure[c]);
      num += (lhs - rhs) * (lhs - rhs);
      den += lhs * lhs;
    }
    const double rel = std::sqrt(num / std::max(den, 1e-300));
    report("affinity: one-step map superposes in the rate vector", rel <= 1e-8,
           "rel err " + ccs::io::format_double(rel));
  }
  {  // monotone loading
    ccs::ReservoirState state = reservoir.initial_state();
    bool monotone = true;
    std::vector<double> prev(spec.n_agents, 0.0);
    for (int a = 0; a < spec.n_agents; ++a)
      prev[a] = ccs::max_region_pressure(state, reservoir.area_of(a));
    for (int t = 0; t < spec.horizon; ++t) {
      state = reservoir.step(state, max_rates);
      for (int a = 0; a < spec.n_agents; ++a) {
        const double m = ccs::max_region_pressure(state, reservoir.area_of(a));
        monotone &= (m >= prev[a] - 1e-9);
        prev[a] = m;
      }
    }
    report("monotone loading: max area pressure non-decreasing at max rates", monotone,
           "");
    bool any_violation = false;
    for (int a = 0; a < spec.n_agents; ++a)
      any_violation |= prev[a] > reservoir.area_of(a).p_threshold;
    report("safety necessity: max-rate injection exceeds a threshold", any_violation,
           "");
  }
  {  // CG vs dense direct solve on small random grids
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> dim(2, 6);
    std::uniform_real_distribution<double> perm(10.0, 500.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      ccs::EnvConfig ec;
      ec.grid.nx = dim(rng);
      ec.grid.ny = dim(rng);
      ec.grid.dx = 800;
      ec.grid.dy = 800;
      ec.grid.thickness = 200;
      ec.grid.porosity = 0.2;
      ec.grid.total_compressibility = 5e-7;
      ec.grid.viscosity = 0.5;
      ec.grid.permeability.resize(ec.grid.cell_count());
      for (auto& v : ec.grid.permeability) v = perm(rng);
      ec.wells.push_back({"W0", 0, 1, 1, ccs::WellKind::Injector, 0.0, 5.0});
      ec.areas.push_back({0, {0}, 60000.0});
      ec.p_init = 20000;
      ec.p_frac = 68000;
      ec.co2_density = 700;
      ec.substeps_per_step = 3;
      ec.dt_step = 1.0;
      const ccs::Reservoir small(ec);
      const auto stepped =
          small.step(small.initial_state(), std::vector<double>{3.0});

      // Independent dense path: assemble (Acc + L) and solve directly.
      const int n = ec.grid.cell_count();
      const auto& sys = small.system();
      const double acc = ec.grid.porosity * ec.grid.total_compressibility *
                         ec.grid.cell_volume() / (ec.dt_step / ec.substeps_per_step);
      std::vector<double> p(n, ec.p_init);
      for (int s = 0; s < ec.substeps_per_step; ++s) {
        std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
        for (int c = 0; c < n; ++c) a[c][c] = acc + sys.row_sum(c);
        for (int jj = 0; jj < ec.grid.ny; ++jj)
          for (int ii = 0; ii + 1 < ec.grid.nx; ++ii) {
            const int c = ec.grid.index(ii, jj);
            a[c][c + 1] -= sys.coupling_x(ii, jj);
            a[c + 1][c] -= sys.coupling_x(ii, jj);
          }
        for (int jj = 0; jj + 1 < ec.grid.ny; ++jj)
          for (int ii = 0; ii < ec.grid.nx; ++ii) {
            const int c = ec.grid.index(ii, jj);
            a[c][c + ec.grid.nx] -= sys.coupling_y(ii, jj);
            a[c + ec.grid.nx][c] -= sys.coupling_y(ii, jj);
          }
        std::vector<double> rhs(n);
        for (int c = 0; c < n; ++c) rhs[c] = acc * p[c];
        rhs[ec.grid.index(1, 1)] += 3.0 * 1e9 / ec.co2_density;
        p = dense_solve(std::move(a), std::move(rhs));
      }
      double num = 0.0, den = 0.0;
      for (int c = 0; c < n; ++c) {
        num += (p[c] - stepped.pressure[c]) * (p[c] - stepped.pressure[c]);
        den += p[c] * p[c];
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
    report("oracle equivalence: CG matches dense solve on small grids", worst <= 1e-8,
           "worst rel err " + ccs::io::format_double(worst));
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Markov-game engine for multi-operator CO2 storage"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, moo_opts, base_opts, check_opts;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  int baseline_episodes = 100;
  int enum_n = 3;

  auto* train_cmd = app.add_subcommand("train", "train safe MADDPG per seed");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--jobs", jobs, "concurrent seed jobs");

  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate saved checkpoints, write summaries");
  add_common(eval_cmd, eval_opts);

  auto* moo_cmd = app.add_subcommand("moo", "run the NSGA-II baseline");
  add_common(moo_cmd, moo_opts);

  auto* base_cmd = app.add_subcommand("baseline-random",
                                      "uniform-random rate baseline, reports threshold "
                                      "exceedance rate");
  add_common(base_cmd, base_opts);
  base_cmd->add_option("--episodes", baseline_episodes, "number of random episodes");

  auto* enum_cmd =
      app.add_subcommand("enumerate-coalitions", "list all coalition structures");
  enum_cmd->add_option("--n", enum_n, "number of agents")->required();

  auto* check_cmd = app.add_subcommand("env-check", "run the environment invariant suite");
  add_common(check_cmd, check_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts, jobs);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts);
    if (moo_cmd->parsed()) return cmd_moo(moo_opts);
    if (base_cmd->parsed()) return cmd_baseline_random(base_opts, baseline_episodes);
    if (enum_cmd->parsed()) return cmd_enumerate(enum_n);
    if (check_cmd->parsed()) return cmd_env_check(check_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
