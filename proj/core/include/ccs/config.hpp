// Experiment configuration: JSON schema with strict validation (unknown keys
// rejected, all offending keys reported at once), defaults for every field,
// scenario presets, run summaries, and learner checkpoints.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccs/game.hpp"
#include "ccs/maddpg.hpp"
#include "ccs/moo.hpp"

namespace ccs::cfg {

struct PermeabilitySpec {
  enum class Mode { Lognormal, Csv };
  Mode mode = Mode::Lognormal;
  double mean_md = 100.0;
  double sigma_log = 0.5;
  std::uint64_t seed = 42;
  std::string csv_path;
};

// Axis-aligned cell rectangle, inclusive bounds.
struct AreaRect {
  int owner = 0;
  int i_min = 0, i_max = 0;
  int j_min = 0, j_max = 0;
  double p_threshold = 0.0;
};

struct ExperimentConfig {
  std::string scenario = "comp-well";
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  // env
  int nx = 55, ny = 16;
  double dx = 800.0, dy = 800.0, thickness = 200.0;
  double porosity = 0.2;
  double total_compressibility = 5e-7;  // 1/kPa
  double viscosity = 0.5;               // mPa·s
  PermeabilitySpec permeability;
  std::vector<WellSpec> wells;   // empty means the default 3x2 injector layout
  std::vector<AreaRect> areas;   // empty means the default left/middle/right thirds
  double p_init = 20000.0;       // kPa
  double p_frac = 68000.0;       // kPa
  double co2_density = 700.0;    // kg/m³
  int substeps_per_step = 10;
  double dt_step = 1.0;          // years
  double cg_tolerance = 1e-12;

  EconomicParams econ;
  PenaltyMode penalty_mode = PenaltyMode::Well;
  double penalty_unit = 0.0;     // 0 means the mode default (5000 well / 50 region)
  double penalty_d = 0.0;
  CoalitionStructure coalition;  // empty blocks means singletons
  int horizon = 25;
  double reward_scale = 0.01;
  double cost_scale = 1e-3;

  rl::TrainConfig train;
  moo::Nsga2Config moo;

  int n_agents() const;
  CmgSpec make_cmg() const;  // materializes permeability, areas, penalty unit
};

ExperimentConfig default_config();

// Scenario presets adjusting coalition structure and penalty mode:
// comp-well | coop-well | comp-region | coop-region.
void apply_scenario(ExperimentConfig& config, const std::string& name);
std::vector<std::string> scenario_names();

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

// FNV-1a of the canonical (defaults-filled, key-sorted) JSON dump.
std::string config_hash(const ExperimentConfig& config);

struct RunSummary {
  int schema_version = 1;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<double> agent_npv;        // $M
  double total_npv = 0.0;               // $M
  std::vector<double> discounted_cost;  // raw penalty units
  std::vector<int> stage_years;
  std::vector<std::vector<double>> stage_max_area_pressure;  // [stage][agent]
  double wall_clock_seconds = 0.0;
  bool best_found = false;
  int best_episode = -1;
};

nlohmann::json to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& j);
void save_summary(const RunSummary& summary, const std::string& path);
RunSummary load_summary(const std::string& path);

// One JSON file per agent (nets + optimizer states + lambda) plus a manifest
// carrying seed, episode counter, selection results, and the config hash.
void save_checkpoints(const std::vector<rl::AgentLearner>& learners,
                      const std::string& dir, const nlohmann::json& manifest);
std::vector<rl::AgentLearner> load_checkpoints(const std::string& dir, int n_agents);
nlohmann::json load_manifest(const std::string& dir);

}  // namespace ccs::cfg
