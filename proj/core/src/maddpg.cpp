#include "ccs/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace ccs::rl {

namespace {
void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) fail("ReplayBuffer: capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  if (batch > data_.size())
    fail("ReplayBuffer: batch size exceeds buffer contents");
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t i = data_.size() - batch; i < data_.size(); ++i) {
    std::uniform_int_distribution<std::size_t> uni(0, i);
    const std::size_t j = uni(rng);
    if (chosen.insert(j).second) {
      out.push_back(j);
    } else {
      chosen.insert(i);
      out.push_back(i);
    }
  }
  return out;
}

double NoiseSchedule::at(int episode) const {
  if (decay_episodes <= 0) return sigma_final;
  const double f = std::min(1.0, static_cast<double>(episode) / decay_episodes);
  return sigma_initial + f * (sigma_final - sigma_initial);
}

void TrainConfig::validate() const {
  if (episodes < 1) fail("train: episodes must be >= 1");
  if (batch_size < 1) fail("train: batch_size must be >= 1");
  if (static_cast<std::size_t>(batch_size) > buffer_capacity)
    fail("train: batch_size must not exceed buffer_capacity");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) fail("train: learning rates must be positive");
  if (!(tau > 0.0) || tau > 1.0) fail("train: tau must be in (0,1]");
  if (noise.sigma_initial < 0.0 || noise.sigma_final < 0.0 || noise.decay_episodes < 0)
    fail("train: noise schedule must be non-negative");
  if (!(eta_lambda > 0.0)) fail("train: eta_lambda must be positive");
  if (!(lambda_max >= 0.0)) fail("train: lambda_max must be >= 0");
  if (eval_every < 1) fail("train: eval_every must be >= 1");
  if (eval_episodes < 1) fail("train: eval_episodes must be >= 1");
  if (actor_hidden.empty() || critic_hidden.empty())
    fail("train: hidden layer lists must be non-empty");
}

std::vector<AgentLearner> make_learners(const CmgSpec& spec, const Reservoir& reservoir,
                                        const TrainConfig& cfg, std::mt19937_64& rng) {
  const int n = spec.n_agents;
  int joint_obs = 0, joint_act = 0;
  for (int a = 0; a < n; ++a) {
    joint_obs += reservoir.observation_dim(a);
    joint_act += static_cast<int>(reservoir.wells_of(a).size());
  }
  const int critic_input = joint_obs + joint_act;

  std::vector<AgentLearner> learners;
  learners.reserve(n);
  for (int a = 0; a < n; ++a) {
    std::vector<int> actor_dims{reservoir.observation_dim(a)};
    actor_dims.insert(actor_dims.end(), cfg.actor_hidden.begin(), cfg.actor_hidden.end());
    actor_dims.push_back(static_cast<int>(reservoir.wells_of(a).size()));

    std::vector<int> critic_dims{critic_input};
    critic_dims.insert(critic_dims.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
    critic_dims.push_back(1);

    AgentLearner l;
    l.actor = nn::Mlp::create(actor_dims, nn::Activation::Tanh, rng);
    l.actor_target = l.actor;
    l.q_reward = nn::Mlp::create(critic_dims, nn::Activation::Identity, rng);
    l.q_reward_target = l.q_reward;
    l.q_cost = nn::Mlp::create(critic_dims, nn::Activation::Identity, rng);
    l.q_cost_target = l.q_cost;
    l.actor_opt = nn::AdamState::for_net(l.actor, cfg.actor_lr);
    l.q_reward_opt = nn::AdamState::for_net(l.q_reward, cfg.critic_lr);
    l.q_cost_opt = nn::AdamState::for_net(l.q_cost, cfg.critic_lr);
    l.lambda = 0.0;
    if (l.q_reward.input_dim() != critic_input)
      fail("make_learners: centralized critic input contract violated");
    learners.push_back(std::move(l));
  }
  return learners;
}

Batch assemble_batch(const ReplayBuffer& buffer, std::vector<std::size_t> indices,
                     const std::vector<AgentLearner>& learners) {
  const int n = static_cast<int>(learners.size());
  Batch b;
  b.indices = std::move(indices);
  b.items.reserve(b.indices.size());
  for (std::size_t idx : b.indices) b.items.push_back(buffer[idx]);

  const Transition& probe = b.items.front();
  b.obs_offsets.resize(n);
  b.action_offsets.resize(n);
  int off = 0;
  for (int a = 0; a < n; ++a) {
    b.obs_offsets[a] = off;
    off += static_cast<int>(probe.obs[a].size());
  }
  for (int a = 0; a < n; ++a) {
    b.action_offsets[a] = off;
    off += static_cast<int>(probe.actions[a].size());
  }
  const int joint_dim = off;

  b.joint.resize(b.items.size());
  b.next_joint.resize(b.items.size());
  for (std::size_t s = 0; s < b.items.size(); ++s) {
    const Transition& tr = b.items[s];
    auto& j = b.joint[s];
    auto& nj = b.next_joint[s];
    j.reserve(joint_dim);
    nj.reserve(joint_dim);
    for (int a = 0; a < n; ++a) j.insert(j.end(), tr.obs[a].begin(), tr.obs[a].end());
    for (int a = 0; a < n; ++a)
      j.insert(j.end(), tr.actions[a].begin(), tr.actions[a].end());
    for (int a = 0; a < n; ++a)
      nj.insert(nj.end(), tr.next_obs[a].begin(), tr.next_obs[a].end());
    for (int a = 0; a < n; ++a) {
      const std::vector<double> ta = nn::forward(learners[a].actor_target, tr.next_obs[a]);
      nj.insert(nj.end(), ta.begin(), ta.end());
    }
  }
  return b;
}

std::vector<double> select_action(const AgentLearner& learner,
                                  std::span<const double> obs, double sigma,
                                  std::mt19937_64& rng) {
  std::vector<double> a = nn::forward(learner.actor, obs);
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : a) v += gauss(rng);
  }
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);
  return a;
}

TdTargets td_targets(const Batch& batch, const AgentLearner& learner, int agent,
                     double gamma) {
  TdTargets t;
  const std::size_t S = batch.items.size();
  t.y_reward.resize(S);
  t.y_cost.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    const Transition& tr = batch.items[s];
    double boot_r = 0.0, boot_c = 0.0;
    if (!tr.done) {
      boot_r = nn::forward(learner.q_reward_target, batch.next_joint[s])[0];
      boot_c = nn::forward(learner.q_cost_target, batch.next_joint[s])[0];
    }
    t.y_reward[s] = tr.rewards[agent] + gamma * boot_r;
    t.y_cost[s] = tr.costs[agent] + gamma * boot_c;
  }
  return t;
}

namespace {

// One Adam step on the MSE between critic(joint) and y; returns the
// pre-update loss.
double critic_mse_step(nn::Mlp& critic, nn::AdamState& opt, const Batch& batch,
                       const std::vector<double>& y) {
  const std::size_t S = batch.items.size();
  nn::Gradients acc = nn::Gradients::zeros_like(critic);
  nn::ForwardCache cache;
  double loss = 0.0;
  double g[1];
  for (std::size_t s = 0; s < S; ++s) {
    const double q = nn::forward(critic, batch.joint[s], &cache)[0];
    const double err = q - y[s];
    loss += err * err;
    g[0] = 2.0 * err / static_cast<double>(S);
    nn::backward_into(critic, cache, std::span<const double>(g, 1), acc);
  }
  loss /= static_cast<double>(S);
  nn::apply_update(critic, acc, opt);
  return loss;
}

}  // namespace

CriticLosses update_critics(AgentLearner& learner, const Batch& batch,
                            const TdTargets& targets) {
  if (batch.items.empty()) fail("update_critics: empty batch");
  CriticLosses losses;
  losses.reward = critic_mse_step(learner.q_reward, learner.q_reward_opt, batch,
                                  targets.y_reward);
  losses.cost = critic_mse_step(learner.q_cost, learner.q_cost_opt, batch,
                                targets.y_cost);
  return losses;
}

double update_actor(AgentLearner& learner, int agent, const Batch& batch) {
  const std::size_t S = batch.items.size();
  if (S == 0) fail("update_actor: empty batch");
  const int act_off = batch.action_offsets[agent];
  const int act_dim = learner.actor.output_dim();

  nn::Gradients actor_acc = nn::Gradients::zeros_like(learner.actor);
  nn::ForwardCache actor_cache, critic_cache;
  std::vector<double> joint;
  std::vector<double> dJ_da(act_dim);
  double loss = 0.0;
  double g[1];
  for (std::size_t s = 0; s < S; ++s) {
    const Transition& tr = batch.items[s];
    const std::vector<double> a_i =
        nn::forward(learner.actor, tr.obs[agent], &actor_cache);

    joint = batch.joint[s];
    std::copy(a_i.begin(), a_i.end(), joint.begin() + act_off);

    const double q_r = nn::forward(learner.q_reward, joint, &critic_cache)[0];
    g[0] = -1.0 / static_cast<double>(S);
    const std::vector<double> dr =
        nn::backward_input_only(learner.q_reward, critic_cache, std::span<const double>(g, 1));
    const double q_c = nn::forward(learner.q_cost, joint, &critic_cache)[0];
    g[0] = learner.lambda / static_cast<double>(S);
    const std::vector<double> dc =
        nn::backward_input_only(learner.q_cost, critic_cache, std::span<const double>(g, 1));
    loss += (-q_r + learner.lambda * q_c) / static_cast<double>(S);

    for (int k = 0; k < act_dim; ++k)
      dJ_da[k] = dr[act_off + k] + dc[act_off + k];
    nn::backward_into(learner.actor, actor_cache, dJ_da, actor_acc);
  }
  nn::apply_update(learner.actor, actor_acc, learner.actor_opt);
  return loss;
}

double update_lambda(AgentLearner& learner, const Batch& batch, double eta_lambda,
                     double c_bar, double lambda_max) {
  if (!(eta_lambda > 0.0)) fail("update_lambda: eta_lambda must be positive");
  double mean_qc = 0.0;
  for (const auto& joint : batch.joint)
    mean_qc += nn::forward(learner.q_cost, joint)[0];
  mean_qc /= static_cast<double>(batch.joint.size());
  learner.lambda =
      std::clamp(learner.lambda + eta_lambda * (mean_qc - c_bar), 0.0, lambda_max);
  return learner.lambda;
}

EvalReport evaluate(const std::vector<nn::Mlp>& actors, const CmgSpec& spec,
                    const Reservoir& reservoir, int episodes) {
  if (episodes < 1) fail("evaluate: episodes must be >= 1");
  const Policy policy = [&actors](int agent, std::span<const double> obs) {
    return nn::forward(actors[agent], obs);
  };
  Trajectory traj;
  for (int e = 0; e < episodes; ++e) traj = run_episode(spec, reservoir, policy);

  EvalReport rep;
  rep.trajectory = std::move(traj);
  rep.npv.resize(spec.n_agents);
  rep.discounted_cost.resize(spec.n_agents);
  for (int a = 0; a < spec.n_agents; ++a) {
    rep.npv[a] = npv(rep.trajectory.pv[a], spec.gamma);
    rep.discounted_cost[a] = discounted_cost(rep.trajectory.cost[a], spec.gamma);
    rep.total_npv += rep.npv[a];
  }
  for (int year : {5, 10, 20, 25})
    if (year <= spec.horizon) rep.stage_years.push_back(year);
  if (rep.stage_years.empty() || rep.stage_years.back() != spec.horizon)
    rep.stage_years.push_back(spec.horizon);
  for (int year : rep.stage_years) {
    std::vector<double> row(spec.n_agents);
    for (int a = 0; a < spec.n_agents; ++a)
      row[a] = rep.trajectory.max_area_pressure[a][year - 1];
    rep.stage_max_area_pressure.push_back(std::move(row));
  }
  return rep;
}

EvalReport evaluate(const std::vector<nn::Mlp>& actors, const CmgSpec& spec,
                    int episodes) {
  Reservoir reservoir(spec.env);
  return evaluate(actors, spec, reservoir, episodes);
}

namespace {

bool learners_have_non_finite(const std::vector<AgentLearner>& learners) {
  for (const auto& l : learners)
    if (nn::has_non_finite(l.actor) || nn::has_non_finite(l.q_reward) ||
        nn::has_non_finite(l.q_cost) || !std::isfinite(l.lambda))
      return true;
  return false;
}

std::vector<nn::Mlp> actors_of(const std::vector<AgentLearner>& learners) {
  std::vector<nn::Mlp> actors;
  actors.reserve(learners.size());
  for (const auto& l : learners) actors.push_back(l.actor);
  return actors;
}

}  // namespace

TrainResult train(const CmgSpec& spec, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  Reservoir reservoir(spec.env);
  const int n = spec.n_agents;

  std::mt19937_64 init_rng(cfg.seed);
  std::mt19937_64 noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 replay_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);

  TrainResult result;
  result.learners = make_learners(spec, reservoir, cfg, init_rng);
  auto& learners = result.learners;
  ReplayBuffer buffer(cfg.buffer_capacity);

  const auto& wells = reservoir.config().wells;
  std::vector<std::vector<WellSpec>> own_specs(n);
  for (const auto& w : wells) own_specs[w.owner].push_back(w);

  for (int episode = 1; episode <= cfg.episodes; ++episode) {
    const double sigma = cfg.noise.at(episode - 1);

    ReservoirState state = reservoir.initial_state();
    std::vector<std::vector<double>> obs(n);
    for (int a = 0; a < n; ++a) obs[a] = reservoir.observe(state, a, spec.horizon);

    EpisodeMetrics em;
    em.episode = episode;
    em.ep_reward.assign(n, 0.0);
    em.ep_cost.assign(n, 0.0);
    em.critic_r_loss.assign(n, 0.0);
    em.critic_c_loss.assign(n, 0.0);
    int learn_steps = 0;

    std::vector<double> joint_rates(wells.size(), 0.0);
    for (int t = 1; t <= spec.horizon; ++t) {
      Transition tr;
      tr.obs = obs;
      tr.actions.resize(n);
      for (int a = 0; a < n; ++a)
        tr.actions[a] = select_action(learners[a], obs[a], sigma, noise_rng);

      for (int a = 0; a < n; ++a) {
        const std::vector<double> rates = action_to_rates(tr.actions[a], own_specs[a]);
        const auto& own = reservoir.wells_of(a);
        for (std::size_t k = 0; k < own.size(); ++k) joint_rates[own[k]] = rates[k];
      }
      state = reservoir.step(state, joint_rates);

      WellFlows flows;
      flows.co2 = joint_rates;
      flows.water.assign(wells.size(), 0.0);
      std::vector<double> raw_pv(n), raw_cost(n);
      for (int a = 0; a < n; ++a) {
        raw_pv[a] = present_value(a, flows, wells, spec.econ, spec.env.dt_step);
        raw_cost[a] =
            penalty(state, a, spec.env.areas, wells, spec.env.grid, spec.penalty);
      }
      const std::vector<double> shared = coalition_rewards(raw_pv, spec.coalition);

      tr.rewards.resize(n);
      tr.costs.resize(n);
      tr.next_obs.resize(n);
      for (int a = 0; a < n; ++a) {
        tr.rewards[a] = shared[a] * spec.reward_scale;
        tr.costs[a] = raw_cost[a] * spec.cost_scale;
        tr.next_obs[a] = reservoir.observe(state, a, spec.horizon);
        em.ep_reward[a] += shared[a];
        em.ep_cost[a] += raw_cost[a];
      }
      tr.done = (t == spec.horizon);
      obs = tr.next_obs;
      buffer.push(std::move(tr));

      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        Batch batch = assemble_batch(
            buffer, buffer.sample_indices(cfg.batch_size, replay_rng), learners);
        for (int a = 0; a < n; ++a) {
          const TdTargets targets = td_targets(batch, learners[a], a, spec.gamma);
          const CriticLosses losses = update_critics(learners[a], batch, targets);
          update_actor(learners[a], a, batch);
          update_lambda(learners[a], batch, cfg.eta_lambda, cfg.cost_threshold,
                        cfg.lambda_max);
          em.critic_r_loss[a] += losses.reward;
          em.critic_c_loss[a] += losses.cost;
        }
        for (int a = 0; a < n; ++a) {
          soft_update(learners[a].actor_target, learners[a].actor, cfg.tau);
          soft_update(learners[a].q_reward_target, learners[a].q_reward, cfg.tau);
          soft_update(learners[a].q_cost_target, learners[a].q_cost, cfg.tau);
        }
        ++learn_steps;
      }
    }

    if (learn_steps > 0)
      for (int a = 0; a < n; ++a) {
        em.critic_r_loss[a] /= learn_steps;
        em.critic_c_loss[a] /= learn_steps;
      }
    em.lambda.resize(n);
    for (int a = 0; a < n; ++a) em.lambda[a] = learners[a].lambda;
    result.log.push_back(std::move(em));

    if (learners_have_non_finite(learners))
      throw std::runtime_error("train: non-finite parameter after episode " +
                               std::to_string(episode));

    if (episode % cfg.eval_every == 0) {
      const EvalReport rep =
          evaluate(actors_of(learners), spec, reservoir, cfg.eval_episodes);
      double team_pv = 0.0;
      bool zero_cost = true;
      for (int a = 0; a < n; ++a) {
        for (double pv : rep.trajectory.pv[a]) team_pv += pv;
        for (double c : rep.trajectory.cost[a]) zero_cost &= (c == 0.0);
      }
      if (zero_cost && team_pv > result.best.team_pv) {
        result.best.found = true;
        result.best.episode = episode;
        result.best.team_pv = team_pv;
        result.best.learners = learners;
        result.best.eval = rep;
      }
    }
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetrics>& log,
                       const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "episode,agent,ep_reward,ep_cost,lambda,critic_r_loss,critic_c_loss\n";
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& em : log)
    for (std::size_t a = 0; a < em.ep_reward.size(); ++a)
      out << em.episode << "," << a << "," << num(em.ep_reward[a]) << ","
          << num(em.ep_cost[a]) << "," << num(em.lambda[a]) << ","
          << num(em.critic_r_loss[a]) << "," << num(em.critic_c_loss[a]) << "\n";
}

}  // namespace ccs::rl
