#include "ccs/config.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccs/io.hpp"

namespace ccs::cfg {

using nlohmann::json;

namespace {

// Accumulates schema errors and tracks consumed keys so unknown keys can be
// rejected with their full path.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out, const char* type_name) {
    if (!has(key)) return;
    consumed_.push_back(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(path_ + "." + key + ": expected " + type_name);
    }
  }

  void number(const std::string& key, double& out) { get(key, out, "a number"); }
  void integer(const std::string& key, int& out) { get(key, out, "an integer"); }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    get(key, out, "an unsigned integer");
  }
  void size(const std::string& key, std::size_t& out) {
    get(key, out, "an unsigned integer");
  }
  void text(const std::string& key, std::string& out) { get(key, out, "a string"); }

  const json* section(const std::string& key) {
    if (!has(key)) return nullptr;
    consumed_.push_back(key);
    const json& s = j_.at(key);
    if (!s.is_object() && !s.is_array()) {
      errors_.push_back(path_ + "." + key + ": expected an object or array");
      return nullptr;
    }
    return &s;
  }

  void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) errors_.push_back(path_ + "." + key + ": " + what);
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& item : j_.items())
      if (std::find(consumed_.begin(), consumed_.end(), item.key()) == consumed_.end())
        errors_.push_back(path_ + "." + item.key() + ": unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> consumed_;
};

std::vector<WellSpec> default_wells(int nx, int ny) {
  const int b1 = nx / 3, b2 = 2 * nx / 3;
  const int xa = b1 / 3, xb = (b1 + b2) / 2, xc = nx - 1 - b1 / 3;
  const int jlo = ny / 4, jhi = 3 * ny / 4;
  std::vector<WellSpec> wells;
  const auto add = [&wells](const std::string& id, int owner, int i, int j) {
    wells.push_back({id, owner, i, j, WellKind::Injector, 0.5, 5.0});
  };
  add("A1", 0, xa, jlo);
  add("A2", 0, xa, jhi);
  add("B1", 1, xb, jlo);
  add("B2", 1, xb, jhi);
  add("C1", 2, xc, jlo);
  add("C2", 2, xc, jhi);
  return wells;
}

std::vector<AreaRect> default_areas(int nx, int ny) {
  const int b1 = nx / 3, b2 = 2 * nx / 3;
  return {
      {0, 0, b1 - 1, 0, ny - 1, 65000.0},
      {1, b1, b2 - 1, 0, ny - 1, 55000.0},
      {2, b2, nx - 1, 0, ny - 1, 55000.0},
  };
}

}  // namespace

int ExperimentConfig::n_agents() const {
  int n = 0;
  const auto& ws = wells.empty() ? default_wells(nx, ny) : wells;
  const auto& as = areas.empty() ? default_areas(nx, ny) : areas;
  for (const auto& w : ws) n = std::max(n, w.owner + 1);
  for (const auto& a : as) n = std::max(n, a.owner + 1);
  return n;
}

CmgSpec ExperimentConfig::make_cmg() const {
  CmgSpec spec;
  spec.env.grid.nx = nx;
  spec.env.grid.ny = ny;
  spec.env.grid.dx = dx;
  spec.env.grid.dy = dy;
  spec.env.grid.thickness = thickness;
  spec.env.grid.porosity = porosity;
  spec.env.grid.total_compressibility = total_compressibility;
  spec.env.grid.viscosity = viscosity;
  if (permeability.mode == PermeabilitySpec::Mode::Lognormal) {
    spec.env.grid.permeability = lognormal_permeability(
        nx, ny, permeability.mean_md, permeability.sigma_log, permeability.seed);
  } else {
    spec.env.grid.permeability = read_permeability_csv(permeability.csv_path, nx, ny);
  }

  spec.env.wells = wells.empty() ? default_wells(nx, ny) : wells;
  const auto rects = areas.empty() ? default_areas(nx, ny) : areas;
  for (const auto& r : rects) {
    ProjectArea area;
    area.owner = r.owner;
    area.p_threshold = r.p_threshold;
    for (int j = r.j_min; j <= r.j_max; ++j)
      for (int i = r.i_min; i <= r.i_max; ++i)
        area.cells.push_back(spec.env.grid.index(i, j));
    std::sort(area.cells.begin(), area.cells.end());
    spec.env.areas.push_back(std::move(area));
  }

  spec.env.p_init = p_init;
  spec.env.p_frac = p_frac;
  spec.env.co2_density = co2_density;
  spec.env.substeps_per_step = substeps_per_step;
  spec.env.dt_step = dt_step;
  spec.env.cg_tolerance = cg_tolerance;

  spec.n_agents = n_agents();
  spec.econ = econ;
  spec.penalty.mode = penalty_mode;
  spec.penalty.unit_penalty =
      penalty_unit > 0.0 ? penalty_unit : PenaltyParams::default_unit_penalty(penalty_mode);
  spec.penalty.d = penalty_d;
  spec.coalition = coalition.blocks.empty() ? CoalitionStructure::singletons(spec.n_agents)
                                            : coalition;
  spec.horizon = horizon;
  spec.gamma = econ.gamma;
  spec.reward_scale = reward_scale;
  spec.cost_scale = cost_scale;
  return spec;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::vector<std::string> scenario_names() {
  return {"comp-well", "coop-well", "comp-region", "coop-region"};
}

void apply_scenario(ExperimentConfig& config, const std::string& name) {
  const int n = config.n_agents();
  if (name == "comp-well") {
    config.coalition = CoalitionStructure::singletons(n);
    config.penalty_mode = PenaltyMode::Well;
  } else if (name == "coop-well") {
    config.coalition = CoalitionStructure::grand(n);
    config.penalty_mode = PenaltyMode::Well;
  } else if (name == "comp-region") {
    config.coalition = CoalitionStructure::singletons(n);
    config.penalty_mode = PenaltyMode::Region;
  } else if (name == "coop-region") {
    config.coalition = CoalitionStructure::grand(n);
    config.penalty_mode = PenaltyMode::Region;
  } else {
    std::string names;
    for (const auto& s : scenario_names()) names += s + " ";
    throw std::invalid_argument("unknown scenario '" + name + "'; expected one of: " + names);
  }
  config.scenario = name;
}

json to_json(const ExperimentConfig& c) {
  json perm{
      {"mode", c.permeability.mode == PermeabilitySpec::Mode::Lognormal ? "lognormal" : "csv"},
      {"mean_md", c.permeability.mean_md},
      {"sigma_log", c.permeability.sigma_log},
      {"seed", c.permeability.seed},
      {"csv_path", c.permeability.csv_path},
  };
  json wells = json::array();
  for (const auto& w : c.wells.empty() ? default_wells(c.nx, c.ny) : c.wells)
    wells.push_back({{"id", w.id},
                     {"owner", w.owner},
                     {"i", w.i},
                     {"j", w.j},
                     {"kind", w.kind == WellKind::Injector ? "injector" : "extractor"},
                     {"rate_min", w.rate_min},
                     {"rate_max", w.rate_max}});
  json areas = json::array();
  for (const auto& a : c.areas.empty() ? default_areas(c.nx, c.ny) : c.areas)
    areas.push_back({{"owner", a.owner},
                     {"i_min", a.i_min},
                     {"i_max", a.i_max},
                     {"j_min", a.j_min},
                     {"j_max", a.j_max},
                     {"p_threshold", a.p_threshold}});

  const CoalitionStructure coalition = c.coalition.blocks.empty()
                                           ? CoalitionStructure::singletons(c.n_agents())
                                           : c.coalition;
  return json{
      {"scenario", c.scenario},
      {"out_dir", c.out_dir},
      {"seeds", c.seeds},
      {"env",
       {
           {"nx", c.nx},
           {"ny", c.ny},
           {"dx", c.dx},
           {"dy", c.dy},
           {"thickness", c.thickness},
           {"porosity", c.porosity},
           {"total_compressibility", c.total_compressibility},
           {"viscosity", c.viscosity},
           {"permeability", perm},
           {"wells", wells},
           {"areas", areas},
           {"p_init", c.p_init},
           {"p_frac", c.p_frac},
           {"co2_density", c.co2_density},
           {"substeps_per_step", c.substeps_per_step},
           {"dt_step", c.dt_step},
           {"cg_tolerance", c.cg_tolerance},
       }},
      {"econ",
       {
           {"r_credit", c.econ.r_credit},
           {"r_op", c.econ.r_op},
           {"r_water", c.econ.r_water},
           {"r_co2_reextract", c.econ.r_co2_reextract},
           {"gamma", c.econ.gamma},
       }},
      {"penalty",
       {
           {"mode", c.penalty_mode == PenaltyMode::Well ? "well" : "region"},
           {"unit_penalty", c.penalty_unit},
           {"d", c.penalty_d},
       }},
      {"coalition", {{"blocks", coalition.blocks}}},
      {"game",
       {
           {"horizon", c.horizon},
           {"reward_scale", c.reward_scale},
           {"cost_scale", c.cost_scale},
       }},
      {"train",
       {
           {"episodes", c.train.episodes},
           {"batch_size", c.train.batch_size},
           {"buffer_capacity", c.train.buffer_capacity},
           {"actor_lr", c.train.actor_lr},
           {"critic_lr", c.train.critic_lr},
           {"tau", c.train.tau},
           {"noise",
            {
                {"sigma_initial", c.train.noise.sigma_initial},
                {"sigma_final", c.train.noise.sigma_final},
                {"decay_episodes", c.train.noise.decay_episodes},
            }},
           {"eta_lambda", c.train.eta_lambda},
           {"lambda_max", c.train.lambda_max},
           {"cost_threshold", c.train.cost_threshold},
           {"eval_every", c.train.eval_every},
           {"eval_episodes", c.train.eval_episodes},
           {"actor_hidden", c.train.actor_hidden},
           {"critic_hidden", c.train.critic_hidden},
       }},
      {"moo",
       {
           {"population", c.moo.population},
           {"generations", c.moo.generations},
           {"crossover_prob", c.moo.crossover_prob},
           {"crossover_eta", c.moo.crossover_eta},
           {"mutation_prob", c.moo.mutation_prob},
           {"mutation_eta", c.moo.mutation_eta},
       }},
  };
}

ExperimentConfig config_from_json(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;

  Reader root(j, "config", errors);
  root.text("scenario", c.scenario);
  root.text("out_dir", c.out_dir);
  if (root.has("seeds")) root.get("seeds", c.seeds, "an array of unsigned integers");

  if (const json* env = root.section("env")) {
    Reader r(*env, "env", errors);
    r.integer("nx", c.nx);
    r.integer("ny", c.ny);
    r.number("dx", c.dx);
    r.number("dy", c.dy);
    r.number("thickness", c.thickness);
    r.number("porosity", c.porosity);
    r.number("total_compressibility", c.total_compressibility);
    r.number("viscosity", c.viscosity);
    if (const json* perm = r.section("permeability")) {
      Reader rp(*perm, "env.permeability", errors);
      std::string mode = "lognormal";
      rp.text("mode", mode);
      if (mode == "lognormal")
        c.permeability.mode = PermeabilitySpec::Mode::Lognormal;
      else if (mode == "csv")
        c.permeability.mode = PermeabilitySpec::Mode::Csv;
      else
        errors.push_back("env.permeability.mode: must be 'lognormal' or 'csv'");
      rp.number("mean_md", c.permeability.mean_md);
      rp.number("sigma_log", c.permeability.sigma_log);
      rp.unsigned64("seed", c.permeability.seed);
      rp.text("csv_path", c.permeability.csv_path);
      rp.finish();
    }
    if (const json* wells = r.section("wells")) {
      if (!wells->is_array()) {
        errors.push_back("env.wells: expected an array");
      } else {
        int idx = 0;
        for (const auto& wj : *wells) {
          Reader rw(wj, "env.wells[" + std::to_string(idx) + "]", errors);
          WellSpec w;
          w.rate_min = 0.5;
          w.rate_max = 5.0;
          rw.text("id", w.id);
          rw.integer("owner", w.owner);
          rw.integer("i", w.i);
          rw.integer("j", w.j);
          std::string kind = "injector";
          rw.text("kind", kind);
          if (kind == "injector")
            w.kind = WellKind::Injector;
          else if (kind == "extractor")
            w.kind = WellKind::Extractor;
          else
            errors.push_back(rw.path() + ".kind: must be 'injector' or 'extractor'");
          rw.number("rate_min", w.rate_min);
          rw.number("rate_max", w.rate_max);
          rw.finish();
          if (w.id.empty()) w.id = "W" + std::to_string(idx);
          c.wells.push_back(std::move(w));
          ++idx;
        }
      }
    }
    if (const json* areas = r.section("areas")) {
      if (!areas->is_array()) {
        errors.push_back("env.areas: expected an array");
      } else {
        int idx = 0;
        for (const auto& aj : *areas) {
          Reader ra(aj, "env.areas[" + std::to_string(idx) + "]", errors);
          AreaRect a;
          ra.integer("owner", a.owner);
          ra.integer("i_min", a.i_min);
          ra.integer("i_max", a.i_max);
          ra.integer("j_min", a.j_min);
          ra.integer("j_max", a.j_max);
          ra.number("p_threshold", a.p_threshold);
          ra.finish();
          c.areas.push_back(a);
          ++idx;
        }
      }
    }
    r.number("p_init", c.p_init);
    r.number("p_frac", c.p_frac);
    r.number("co2_density", c.co2_density);
    r.integer("substeps_per_step", c.substeps_per_step);
    r.number("dt_step", c.dt_step);
    r.number("cg_tolerance", c.cg_tolerance);
    r.finish();
  }

  if (const json* econ = root.section("econ")) {
    Reader r(*econ, "econ", errors);
    r.number("r_credit", c.econ.r_credit);
    r.number("r_op", c.econ.r_op);
    r.number("r_water", c.econ.r_water);
    r.number("r_co2_reextract", c.econ.r_co2_reextract);
    r.number("gamma", c.econ.gamma);
    r.check(c.econ.gamma > 0.0 && c.econ.gamma < 1.0, "gamma", "must be in (0,1)");
    r.finish();
  }

  if (const json* pen = root.section("penalty")) {
    Reader r(*pen, "penalty", errors);
    std::string mode = "well";
    r.text("mode", mode);
    if (mode == "well")
      c.penalty_mode = PenaltyMode::Well;
    else if (mode == "region")
      c.penalty_mode = PenaltyMode::Region;
    else
      errors.push_back("penalty.mode: must be 'well' or 'region'");
    r.number("unit_penalty", c.penalty_unit);
    r.number("d", c.penalty_d);
    r.check(c.penalty_d >= 0.0, "d", "must be >= 0");
    r.finish();
  }

  if (const json* coal = root.section("coalition")) {
    Reader r(*coal, "coalition", errors);
    if (r.has("blocks"))
      r.get("blocks", c.coalition.blocks, "an array of arrays of agent indices");
    r.finish();
  }

  if (const json* game = root.section("game")) {
    Reader r(*game, "game", errors);
    r.integer("horizon", c.horizon);
    r.number("reward_scale", c.reward_scale);
    r.number("cost_scale", c.cost_scale);
    r.check(c.horizon >= 1, "horizon", "must be >= 1");
    r.finish();
  }

  if (const json* train = root.section("train")) {
    Reader r(*train, "train", errors);
    r.integer("episodes", c.train.episodes);
    r.integer("batch_size", c.train.batch_size);
    r.size("buffer_capacity", c.train.buffer_capacity);
    r.number("actor_lr", c.train.actor_lr);
    r.number("critic_lr", c.train.critic_lr);
    r.number("tau", c.train.tau);
    if (const json* noise = r.section("noise")) {
      Reader rn(*noise, "train.noise", errors);
      rn.number("sigma_initial", c.train.noise.sigma_initial);
      rn.number("sigma_final", c.train.noise.sigma_final);
      rn.integer("decay_episodes", c.train.noise.decay_episodes);
      rn.finish();
    }
    r.number("eta_lambda", c.train.eta_lambda);
    r.number("lambda_max", c.train.lambda_max);
    r.number("cost_threshold", c.train.cost_threshold);
    r.integer("eval_every", c.train.eval_every);
    r.integer("eval_episodes", c.train.eval_episodes);
    if (r.has("actor_hidden"))
      r.get("actor_hidden", c.train.actor_hidden, "an array of integers");
    if (r.has("critic_hidden"))
      r.get("critic_hidden", c.train.critic_hidden, "an array of integers");
    r.check(c.train.tau > 0.0 && c.train.tau <= 1.0, "tau", "must be in (0,1]");
    r.finish();
  }

  if (const json* moo = root.section("moo")) {
    Reader r(*moo, "moo", errors);
    r.integer("population", c.moo.population);
    r.integer("generations", c.moo.generations);
    r.number("crossover_prob", c.moo.crossover_prob);
    r.number("crossover_eta", c.moo.crossover_eta);
    r.number("mutation_prob", c.moo.mutation_prob);
    r.number("mutation_eta", c.moo.mutation_eta);
    r.finish();
  }
  root.finish();

  if (c.seeds.empty()) errors.push_back("config.seeds: must be non-empty");

  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument("cannot parse config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  io::atomic_write(path, to_json(config).dump(2) + "\n");
}

std::string config_hash(const ExperimentConfig& config) {
  // out_dir does not affect what the experiment computes.
  json j = to_json(config);
  j.erase("out_dir");
  return io::hex64(io::fnv1a64(j.dump()));
}

json to_json(const RunSummary& s) {
  return json{
      {"schema_version", s.schema_version},
      {"scenario", s.scenario},
      {"seed", s.seed},
      {"config_hash", s.config_hash},
      {"agent_npv", s.agent_npv},
      {"total_npv", s.total_npv},
      {"discounted_cost", s.discounted_cost},
      {"stage_years", s.stage_years},
      {"stage_max_area_pressure", s.stage_max_area_pressure},
      {"wall_clock_seconds", s.wall_clock_seconds},
      {"best_found", s.best_found},
      {"best_episode", s.best_episode},
  };
}

RunSummary summary_from_json(const json& j) {
  RunSummary s;
  s.schema_version = j.at("schema_version").get<int>();
  s.scenario = j.at("scenario").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.config_hash = j.at("config_hash").get<std::string>();
  s.agent_npv = j.at("agent_npv").get<std::vector<double>>();
  s.total_npv = j.at("total_npv").get<double>();
  s.discounted_cost = j.at("discounted_cost").get<std::vector<double>>();
  s.stage_years = j.at("stage_years").get<std::vector<int>>();
  s.stage_max_area_pressure =
      j.at("stage_max_area_pressure").get<std::vector<std::vector<double>>>();
  s.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  s.best_found = j.at("best_found").get<bool>();
  s.best_episode = j.at("best_episode").get<int>();
  return s;
}

void save_summary(const RunSummary& summary, const std::string& path) {
  double total = 0.0;
  for (double v : summary.agent_npv) total += v;
  const double scale = std::max(1.0, std::abs(summary.total_npv));
  if (std::abs(total - summary.total_npv) > 1e-9 * scale)
    throw std::invalid_argument("save_summary: total_npv must equal the per-agent sum");
  io::atomic_write(path, to_json(summary).dump(2) + "\n");
}

RunSummary load_summary(const std::string& path) {
  return summary_from_json(json::parse(io::read_file(path)));
}

namespace {
json learner_to_json(const rl::AgentLearner& l) {
  return json{
      {"schema_version", 1},
      {"lambda", l.lambda},
      {"actor", nn::to_json(l.actor)},
      {"actor_target", nn::to_json(l.actor_target)},
      {"q_reward", nn::to_json(l.q_reward)},
      {"q_reward_target", nn::to_json(l.q_reward_target)},
      {"q_cost", nn::to_json(l.q_cost)},
      {"q_cost_target", nn::to_json(l.q_cost_target)},
      {"actor_opt", nn::to_json(l.actor_opt)},
      {"q_reward_opt", nn::to_json(l.q_reward_opt)},
      {"q_cost_opt", nn::to_json(l.q_cost_opt)},
  };
}

rl::AgentLearner learner_from_json(const json& j) {
  rl::AgentLearner l;
  l.lambda = j.at("lambda").get<double>();
  l.actor = nn::mlp_from_json(j.at("actor"));
  l.actor_target = nn::mlp_from_json(j.at("actor_target"));
  l.q_reward = nn::mlp_from_json(j.at("q_reward"));
  l.q_reward_target = nn::mlp_from_json(j.at("q_reward_target"));
  l.q_cost = nn::mlp_from_json(j.at("q_cost"));
  l.q_cost_target = nn::mlp_from_json(j.at("q_cost_target"));
  l.actor_opt = nn::adam_from_json(j.at("actor_opt"));
  l.q_reward_opt = nn::adam_from_json(j.at("q_reward_opt"));
  l.q_cost_opt = nn::adam_from_json(j.at("q_cost_opt"));
  return l;
}
}  // namespace

void save_checkpoints(const std::vector<rl::AgentLearner>& learners,
                      const std::string& dir, const json& manifest) {
  io::ensure_directory(dir);
  for (std::size_t a = 0; a < learners.size(); ++a)
    io::atomic_write(dir + "/checkpoint_agent" + std::to_string(a) + ".json",
                     learner_to_json(learners[a]).dump() + "\n");
  io::atomic_write(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::vector<rl::AgentLearner> load_checkpoints(const std::string& dir, int n_agents) {
  std::vector<rl::AgentLearner> learners;
  for (int a = 0; a < n_agents; ++a) {
    const std::string path = dir + "/checkpoint_agent" + std::to_string(a) + ".json";
    learners.push_back(learner_from_json(json::parse(io::read_file(path))));
  }
  return learners;
}

json load_manifest(const std::string& dir) {
  return json::parse(io::read_file(dir + "/manifest.json"));
}

}  // namespace ccs::cfg
