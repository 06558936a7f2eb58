// Safe multi-agent deterministic policy gradient with centralized training
// and decentralized execution: per-agent actors, centralized reward and cost
// critics, Lagrangian actor loss, projected dual updates, replay buffer.

#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "ccs/game.hpp"
#include "ccs/mlp.hpp"

namespace ccs::rl {

struct AgentLearner {
  nn::Mlp actor, actor_target;
  nn::Mlp q_reward, q_reward_target;
  nn::Mlp q_cost, q_cost_target;
  nn::AdamState actor_opt, q_reward_opt, q_cost_opt;
  double lambda = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t idx) const { return data_[idx]; }

  // batch distinct indices, uniform over current contents (Floyd's sampling).
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t next_ = 0;
};

struct NoiseSchedule {
  double sigma_initial = 0.3;
  double sigma_final = 0.05;
  int decay_episodes = 2000;

  // episode counted from 0; linear decay, then flat at sigma_final.
  double at(int episode) const;
};

struct TrainConfig {
  int episodes = 3000;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double tau = 0.01;
  NoiseSchedule noise;
  double eta_lambda = 0.01;
  double lambda_max = 100.0;
  double cost_threshold = 0.0;  // c-bar in the dual update
  std::uint64_t seed = 1;
  int eval_every = 10;     // noise-free evaluation cadence, in episodes
  int eval_episodes = 5;
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{128, 128};

  void validate() const;
};

// Minibatch assembled into centralized-critic inputs. Joint layout is
// [obs_0 .. obs_{N-1}, act_0 .. act_{N-1}]; next-state actions come from the
// target actors of all agents.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<Transition> items;                // sampled copies
  std::vector<std::vector<double>> joint;       // per sample, obs+actions from buffer
  std::vector<std::vector<double>> next_joint;  // per sample, next obs + target actions
  std::vector<int> obs_offsets;                 // per agent, into joint
  std::vector<int> action_offsets;              // per agent, into joint
};

Batch assemble_batch(const ReplayBuffer& buffer, std::vector<std::size_t> indices,
                     const std::vector<AgentLearner>& learners);

// Tanh-bounded actor output plus N(0, sigma²) per component, clipped to [-1,1].
std::vector<double> select_action(const AgentLearner& learner,
                                  std::span<const double> obs, double sigma,
                                  std::mt19937_64& rng);

// y^r = r + gamma * Q^r_target(o', a'_target)  (bootstrap dropped on terminal);
// same for y^c with costs and the cost critic.
struct TdTargets {
  std::vector<double> y_reward;
  std::vector<double> y_cost;
};
TdTargets td_targets(const Batch& batch, const AgentLearner& learner, int agent,
                     double gamma);

// One Adam step on the mean-squared TD error of each critic; returns both
// pre-update losses.
struct CriticLosses {
  double reward = 0.0;
  double cost = 0.0;
};
CriticLosses update_critics(AgentLearner& learner, const Batch& batch,
                            const TdTargets& targets);

// One Adam step on J = (1/S) sum [-Q^r + lambda * Q^c], differentiated through
// agent i's own action slot only; other agents' actions stay as sampled.
double update_actor(AgentLearner& learner, int agent, const Batch& batch);

// Projected subgradient dual step on the batch mean of the online cost critic:
// lambda <- clamp(lambda + eta * (mean Q^c - c_bar), 0, lambda_max).
double update_lambda(AgentLearner& learner, const Batch& batch, double eta_lambda,
                     double c_bar, double lambda_max);

struct EvalReport {
  std::vector<double> npv;              // per agent, $M
  std::vector<double> discounted_cost;  // per agent, raw penalty units
  double total_npv = 0.0;
  std::vector<int> stage_years;
  std::vector<std::vector<double>> stage_max_area_pressure;  // [stage][agent], kPa
  Trajectory trajectory;
};

// Noise-free decentralized rollouts of the given actors.
EvalReport evaluate(const std::vector<nn::Mlp>& actors, const CmgSpec& spec,
                    const Reservoir& reservoir, int episodes);
EvalReport evaluate(const std::vector<nn::Mlp>& actors, const CmgSpec& spec,
                    int episodes);

struct EpisodeMetrics {
  int episode = 0;
  std::vector<double> ep_reward;       // per agent, undiscounted shared-PV sum, $M
  std::vector<double> ep_cost;         // per agent, undiscounted raw cost sum
  std::vector<double> lambda;          // per agent, after the episode
  std::vector<double> critic_r_loss;   // per agent, episode mean
  std::vector<double> critic_c_loss;   // per agent, episode mean
};

struct BestPolicy {
  bool found = false;
  int episode = -1;
  double team_pv = -std::numeric_limits<double>::infinity();
  std::vector<AgentLearner> learners;
  EvalReport eval;
};

struct TrainResult {
  std::vector<AgentLearner> learners;
  std::vector<EpisodeMetrics> log;
  BestPolicy best;
};

std::vector<AgentLearner> make_learners(const CmgSpec& spec, const Reservoir& reservoir,
                                        const TrainConfig& cfg, std::mt19937_64& rng);

// Algorithm: M episodes of environment interaction with one learning step per
// environment step once the buffer holds a full batch; soft target updates
// every learning step; periodic noise-free evaluation tracks the best policy,
// defined as the highest team PV among evaluations with zero episodic cost.
TrainResult train(const CmgSpec& spec, const TrainConfig& cfg);

void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetrics>& log,
                       const std::string& provenance = "");

}  // namespace ccs::rl
