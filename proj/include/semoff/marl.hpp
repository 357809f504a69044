#ifndef SEMOFF_MARL_HPP
#define SEMOFF_MARL_HPP

#include "semoff/config.hpp"
#include "semoff/env.hpp"
#include "semoff/errors.hpp"
#include "semoff/nnet.hpp"
#include "semoff/ppo.hpp"
#include "semoff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace semoff::marl {

/// One PPO agent per UE, indexed by UE id.
struct AgentPool {
    std::vector<ppo::PpoAgent> agents;

    static AgentPool create(const ScenarioConfig& cfg, std::uint64_t master_seed)
    {
        AgentPool pool;
        for (int i = 0; i < cfg.env.num_ues; ++i)
            pool.agents.push_back(ppo::PpoAgent::create(cfg.net, derive_seed(master_seed, Stream::ActorInit, i),
                                                        derive_seed(master_seed, Stream::CriticInit, i)));
        return pool;
    }

    std::size_t size() const { return agents.size(); }
};

struct FedSchedule {
    int period = 100;
    bool average_critic = true;
    bool reset_optimizer = false;

    static FedSchedule from(const MarlConfig& m) { return {m.fed_period, m.average_critic, m.reset_optimizer}; }
    bool due(int episodes_done) const { return period >= 1 && episodes_done > 0 && episodes_done % period == 0; }
};

struct EpisodeStats {
    double episode_return = 0.0; // sum of global rewards including the terminal bonus
    double energy_j = 0.0;
    double mean_entropy = 0.0;
    double terminal_reward = 0.0;
    int steps = 0;
    int violations = 0;
    std::optional<int> completion_step;
};

struct Rollout {
    std::vector<ppo::Trajectory> trajectories; // one per agent
    EpisodeStats stats;
};

/// Runs one episode from the environment's current (freshly reset) state.
/// Every agent stores the same global reward stream; the terminal bonus is
/// folded into the last step's reward.
template <class Engine>
Rollout collect_episode(const AgentPool& pool, env::Environment& environment, Engine& rng)
{
    if (pool.size() != static_cast<std::size_t>(environment.num_ues()))
        throw ShapeError("collect_episode: agent count does not match UE count");
    const auto bounds = ppo::ActionBounds::from(environment.config().env);
    Rollout ro;
    ro.trajectories.resize(pool.size());
    double entropy_sum = 0.0;
    long entropy_n = 0;
    while (!environment.done()) {
        env::JointAction joint(pool.size());
        std::vector<ppo::TrajectoryStep> pending(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto obs = environment.observe(i);
            const auto out = pool.agents[i].policy(obs);
            const auto s = ppo::act(out, bounds, rng);
            pending[i].obs = obs;
            pending[i].action = s.action;
            pending[i].logprob = s.logprob;
            pending[i].value = pool.agents[i].value(obs);
            joint[i] = s.action.to_env(bounds);
            entropy_sum += ppo::entropy(out);
            ++entropy_n;
        }
        const auto outcome = environment.step(joint);
        double r = outcome.reward;
        if (outcome.done) {
            r += outcome.terminal_reward;
            ro.stats.terminal_reward = outcome.terminal_reward;
            ro.stats.completion_step = outcome.completion_step;
        }
        for (std::size_t i = 0; i < pool.size(); ++i) {
            pending[i].reward = r;
            pending[i].done = outcome.done;
            ro.trajectories[i].steps.push_back(pending[i]);
        }
        ro.stats.episode_return += r;
        ro.stats.energy_j += outcome.energy_j;
        ro.stats.violations += outcome.violations();
        ++ro.stats.steps;
    }
    ro.stats.mean_entropy = entropy_n ? entropy_sum / static_cast<double>(entropy_n) : 0.0;
    return ro;
}

namespace detail {

/// Element-wise uniform mean. Values are sorted per element before summing so
/// the result does not depend on agent order.
inline std::vector<double> uniform_mean(const std::vector<std::span<const double>>& vecs)
{
    const std::size_t n = vecs.front().size();
    for (const auto& v : vecs)
        if (v.size() != n) throw ShapeError("federated_average: parameter vectors differ in length");
    std::vector<double> out(n), col(vecs.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t a = 0; a < vecs.size(); ++a) col[a] = vecs[a][k];
        std::sort(col.begin(), col.end());
        double s = 0.0;
        for (double x : col) s += x;
        out[k] = s / static_cast<double>(vecs.size());
    }
    return out;
}

} // namespace detail

/// Replaces every agent's actor (and, by default, critic) with the uniform mean.
inline void federated_average(AgentPool& pool, const FedSchedule& schedule)
{
    if (pool.agents.empty()) return;
    const auto& shape_a = pool.agents.front().actor.sizes();
    const auto& shape_c = pool.agents.front().critic.sizes();
    for (const auto& ag : pool.agents)
        if (ag.actor.sizes() != shape_a || ag.critic.sizes() != shape_c)
            throw ShapeError("federated_average: agents have different network shapes");

    std::vector<std::span<const double>> actors, critics;
    for (const auto& ag : pool.agents) {
        actors.push_back(ag.actor.params());
        critics.push_back(ag.critic.params());
    }
    const auto mean_actor = detail::uniform_mean(actors);
    const auto mean_critic = schedule.average_critic ? detail::uniform_mean(critics) : std::vector<double>{};
    for (auto& ag : pool.agents) {
        ag.actor.set_params(mean_actor);
        if (schedule.average_critic) ag.critic.set_params(mean_critic);
        if (schedule.reset_optimizer) {
            ag.actor_opt = nnet::AdamState(ag.actor.num_params());
            ag.critic_opt = nnet::AdamState(ag.critic.num_params());
        }
    }
}

/// One row of the training curve.
struct EpisodeMetrics {
    int episode = 0;
    double mean_reward = 0.0; // episode return, identical for every agent
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0; // mean policy entropy over the episode's decisions
    double clip_fraction = 0.0;
    double energy_j = 0.0;
    int completion_step = -1;
    int steps = 0;
};

struct TrainingRecord {
    std::vector<EpisodeMetrics> episodes;
};

struct TrainOptions {
    std::string run_dir; // empty: no checkpoints
    std::function<void(const EpisodeMetrics&)> on_episode;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::size_t agent, int episode)
{
    return run_dir / ("agent_" + std::to_string(agent)) / ("ckpt_" + std::to_string(episode) + ".bin");
}

inline nnet::Checkpoint to_checkpoint(const ppo::PpoAgent& ag, int episode)
{
    return {nnet::CheckpointKind::Ppo,
            static_cast<std::uint64_t>(episode),
            {ag.actor.flatten(), ag.critic.flatten()},
            {ag.actor_opt, ag.critic_opt}};
}

inline ppo::PpoAgent from_checkpoint(const nnet::Checkpoint& ck)
{
    if (ck.kind != nnet::CheckpointKind::Ppo || ck.nets.size() != 2 || ck.optimizers.size() != 2)
        throw MissingArtifact("checkpoint does not hold a PPO agent");
    ppo::PpoAgent ag{nnet::DenseNet::from_params(ck.nets[0]), nnet::DenseNet::from_params(ck.nets[1]),
                     ck.optimizers[0], ck.optimizers[1]};
    return ag;
}

inline void save_pool(const AgentPool& pool, const std::filesystem::path& run_dir, int episode)
{
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto p = checkpoint_path(run_dir, i, episode);
        std::filesystem::create_directories(p.parent_path());
        nnet::save_checkpoint(p.string(), to_checkpoint(pool.agents[i], episode));
    }
}

/// Latest `ckpt_<episode>.bin` in a directory, or nullopt.
inline std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& agent_dir)
{
    std::optional<std::filesystem::path> best;
    long best_ep = -1;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(agent_dir, ec)) {
        const auto name = e.path().filename().string();
        if (name.rfind("ckpt_", 0) != 0 || e.path().extension() != ".bin") continue;
        try {
            std::size_t pos = 0;
            const auto stem = name.substr(5, name.size() - 9);
            long ep = std::stol(stem, &pos);
            if (pos != stem.size()) continue;
            if (ep > best_ep) {
                best_ep = ep;
                best = e.path();
            }
        } catch (const std::exception&) {
        }
    }
    return best;
}

inline AgentPool load_pool(const std::filesystem::path& run_dir, int num_agents)
{
    AgentPool pool;
    for (int i = 0; i < num_agents; ++i) {
        const auto dir = run_dir / ("agent_" + std::to_string(i));
        const auto ck = latest_checkpoint(dir);
        if (!ck) throw MissingArtifact("no checkpoint in '" + dir.string() + "'");
        pool.agents.push_back(from_checkpoint(nnet::load_checkpoint(ck->string())));
    }
    return pool;
}

inline bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Federated MAPPO training: collect an episode, update every agent on its own
/// trajectory, average models every `marl.fed_period` episodes.
///
/// Seed fan-out from `train.seed`: network init per agent (ActorInit/CriticInit, index = agent),
/// environment reset per episode (Environment stream, index = episode), one action-sampling
/// stream and one minibatch-shuffle stream for the whole run.
inline TrainingRecord train(const ScenarioConfig& cfg, AgentPool& pool, const TrainOptions& opts = {})
{
    validate(cfg);
    TrainingRecord record;
    const std::uint64_t master = cfg.train.seed;
    pool = AgentPool::create(cfg, master);
    if (cfg.train.episodes == 0) return record;

    env::Environment environment(cfg, env::table_for(cfg));
    const auto bounds = ppo::ActionBounds::from(cfg.env);
    const auto schedule = FedSchedule::from(cfg.marl);
    const ppo::GaeConfig gae{cfg.ppo.gamma, cfg.ppo.lambda};
    Rng sampling = make_rng(master, Stream::Sampling);
    Rng shuffling = make_rng(master, Stream::Minibatch);

    for (int ep = 0; ep < cfg.train.episodes; ++ep) {
        environment.reset(derive_seed(master, Stream::Environment, static_cast<std::uint64_t>(ep)));
        auto ro = collect_episode(pool, environment, sampling);

        EpisodeMetrics m;
        m.episode = ep;
        m.mean_reward = ro.stats.episode_return;
        m.energy_j = ro.stats.energy_j;
        m.entropy = ro.stats.mean_entropy;
        m.completion_step = ro.stats.completion_step.value_or(-1);
        m.steps = ro.stats.steps;

        bool finite = true;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (ro.trajectories[i].steps.empty()) continue;
            auto batch = ppo::build_batch(ro.trajectories[i], gae);
            const auto st = ppo::combined_update(pool.agents[i], std::move(batch), cfg.ppo, bounds, shuffling);
            m.actor_loss += st.actor_loss / static_cast<double>(pool.size());
            m.critic_loss += st.critic_loss / static_cast<double>(pool.size());
            m.clip_fraction += st.clip_fraction / static_cast<double>(pool.size());
            finite = finite && st.rejected_steps == 0 && all_finite(pool.agents[i].actor.params()) &&
                     all_finite(pool.agents[i].critic.params());
        }
        finite = finite && std::isfinite(m.actor_loss) && std::isfinite(m.critic_loss);
        if (!finite) {
            if (!opts.run_dir.empty()) save_pool(pool, opts.run_dir, ep + 1);
            throw NumericError("non-finite loss or parameters at episode " + std::to_string(ep) +
                               (opts.run_dir.empty() ? "" : "; diagnostic checkpoint written to " + opts.run_dir));
        }

        if (schedule.due(ep + 1)) {
            federated_average(pool, schedule);
            if (!opts.run_dir.empty()) save_pool(pool, opts.run_dir, ep + 1);
        }
        record.episodes.push_back(m);
        if (opts.on_episode) opts.on_episode(m);
    }
    if (!opts.run_dir.empty() && !schedule.due(cfg.train.episodes)) save_pool(pool, opts.run_dir, cfg.train.episodes);
    return record;
}

/// Joint action from every agent's deterministic policy.
inline env::JointAction greedy_joint_action(const AgentPool& pool, const env::Environment& environment)
{
    const auto bounds = ppo::ActionBounds::from(environment.config().env);
    env::JointAction joint(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        joint[i] = ppo::mode(pool.agents[i].policy(environment.observe(i)), bounds).to_env(bounds);
    return joint;
}

} // namespace semoff::marl

#endif // SEMOFF_MARL_HPP
