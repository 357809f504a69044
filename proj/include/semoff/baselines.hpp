#ifndef SEMOFF_BASELINES_HPP
#define SEMOFF_BASELINES_HPP

#include "semoff/config.hpp"
#include "semoff/env.hpp"
#include "semoff/errors.hpp"
#include "semoff/marl.hpp"
#include "semoff/nnet.hpp"
#include "semoff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace semoff::baselines {

/// Composite discrete action set: {local} x frequency levels, then {offload} x power levels.
/// Index i < L_f means local at freq_levels[i]; otherwise offload at power_levels[i - L_f].
struct DiscreteActionGrid {
    std::vector<double> freq_levels_hz;
    std::vector<double> power_levels_w;
    double f_idle_hz = 0.0;

    /// Power levels are evenly spaced in dBm, frequency levels evenly spaced in Hz,
    /// both including the range endpoints. A single level sits at the upper end.
    static DiscreteActionGrid from(const ScenarioConfig& cfg)
    {
        DiscreteActionGrid g;
        g.f_idle_hz = cfg.env.f_idle_hz;
        const int lf = cfg.grid.freq_levels, lp = cfg.grid.power_levels;
        if (lf < 1 || lp < 1) throw ConfigError("config key 'grid.freq_levels': grids need at least one level");
        for (int i = 0; i < lf; ++i)
            g.freq_levels_hz.push_back(lf == 1 ? cfg.env.f_max_hz
                                               : cfg.env.f_min_hz + (cfg.env.f_max_hz - cfg.env.f_min_hz) * i / (lf - 1));
        const double lo = watt_to_dbm(cfg.env.p_min_w), hi = watt_to_dbm(cfg.env.p_max_w);
        for (int i = 0; i < lp; ++i) {
            double w = dbm_to_watt(lp == 1 ? hi : lo + (hi - lo) * i / (lp - 1));
            g.power_levels_w.push_back(std::min(w, cfg.env.p_max_w));
        }
        return g;
    }

    std::size_t size() const { return freq_levels_hz.size() + power_levels_w.size(); }

    env::UeAction action(std::size_t index) const
    {
        if (index < freq_levels_hz.size()) return {0, 0.0, freq_levels_hz[index]};
        const auto j = index - freq_levels_hz.size();
        if (j >= power_levels_w.size()) throw std::out_of_range("DiscreteActionGrid: index out of range");
        return {1, power_levels_w[j], f_idle_hz};
    }
};

// --- static policies ----------------------------------------------------------

enum class StaticMode { Local, Remote, Random };

inline StaticMode parse_static_mode(const std::string& s)
{
    if (s == "local") return StaticMode::Local;
    if (s == "remote") return StaticMode::Remote;
    if (s == "random") return StaticMode::Random;
    throw ConfigError("unknown static policy '" + s + "'");
}

/// local: rho=0 at f_max. remote: rho=1 at p_max. random: fair coin for rho,
/// uniform power and frequency (all three always drawn, so the stream stays aligned).
template <class Engine>
env::UeAction static_action(StaticMode mode, const EnvConfig& e, Engine& rng)
{
    switch (mode) {
    case StaticMode::Local:
        return {0, 0.0, e.f_max_hz};
    case StaticMode::Remote:
        return {1, e.p_max_w, e.f_idle_hz};
    case StaticMode::Random: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int rho = u(rng) < 0.5 ? 1 : 0;
        const double p = e.p_min_w + (e.p_max_w - e.p_min_w) * u(rng);
        const double f = e.f_min_hz + (e.f_max_hz - e.f_min_hz) * u(rng);
        return rho ? env::UeAction{1, p, e.f_idle_hz} : env::UeAction{0, 0.0, f};
    }
    }
    return {};
}

// --- exhaustive search --------------------------------------------------------

struct ExhaustiveResult {
    env::JointAction action;
    std::vector<std::size_t> indices; // grid index per UE
    double energy_j = 0.0;
    bool infeasible = false; // no joint action satisfied every constraint
    int violations = 0;
    std::size_t evaluated = 0;
};

/// Enumerates every joint grid action (UE 0 is the most significant digit) and
/// returns the feasible one with the least step energy; ties keep the first in
/// lexicographic order. Without any feasible action, returns the one with the
/// fewest violations (then least energy) and sets `infeasible`. UEs with empty
/// queues are pinned to index 0 since their action has no effect.
inline ExhaustiveResult exhaustive_search(const env::Environment& environment, const DiscreteActionGrid& grid,
                                          const std::vector<channel::ChannelDraw>& draws, double max_combinations)
{
    const auto& ues = environment.ues();
    const std::size_t n = ues.size();
    const std::size_t levels = grid.size();
    std::vector<std::size_t> radix(n);
    double combos = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        radix[i] = ues[i].task.queue_len > 0 ? levels : 1;
        combos *= static_cast<double>(radix[i]);
    }
    if (std::pow(static_cast<double>(levels), static_cast<double>(n)) > max_combinations)
        throw ConfigError("config key 'exhaustive.max_combinations': " + std::to_string(levels) + "^" +
                          std::to_string(n) + " joint actions exceed the guard");

    ExhaustiveResult best;
    best.energy_j = std::numeric_limits<double>::infinity();
    bool have_feasible = false;
    int best_viol = std::numeric_limits<int>::max();

    std::vector<std::size_t> idx(n, 0);
    env::JointAction joint(n);
    for (;;) {
        for (std::size_t i = 0; i < n; ++i) joint[i] = grid.action(idx[i]);
        const auto out = environment.evaluate(joint, draws);
        ++best.evaluated;
        const int v = out.violations();
        if (v == 0) {
            if (!have_feasible || out.energy_j < best.energy_j) {
                have_feasible = true;
                best.energy_j = out.energy_j;
                best.indices = idx;
                best_viol = 0;
            }
        } else if (!have_feasible && (v < best_viol || (v == best_viol && out.energy_j < best.energy_j))) {
            best_viol = v;
            best.energy_j = out.energy_j;
            best.indices = idx;
        }
        std::size_t d = n;
        while (d-- > 0) {
            if (++idx[d] < radix[d]) break;
            idx[d] = 0;
        }
        if (d == static_cast<std::size_t>(-1)) break;
    }
    best.infeasible = !have_feasible;
    best.violations = have_feasible ? 0 : best_viol;
    best.action.resize(n);
    for (std::size_t i = 0; i < n; ++i) best.action[i] = grid.action(best.indices[i]);
    (void)combos;
    return best;
}

// --- DQN ---------------------------------------------------------------------

struct Transition {
    env::Observation obs{};
    int action = 0;
    double reward = 0.0;
    env::Observation next_obs{};
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

    void push(const Transition& t)
    {
        if (data_.size() < capacity_) {
            data_.push_back(t);
        } else {
            data_[head_] = t;
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

/// Argmax with ties resolved to the lowest index.
inline int greedy_action(std::span<const double> q)
{
    int best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
    return best;
}

template <class Engine>
int epsilon_greedy(std::span<const double> q, double epsilon, Engine& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (epsilon > 0 && u(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
        return pick(rng);
    }
    return greedy_action(q);
}

/// Entropy of the epsilon-greedy action distribution over n actions.
inline double epsilon_greedy_entropy(double epsilon, std::size_t n)
{
    if (n <= 1) return 0.0;
    const double other = epsilon / static_cast<double>(n);
    const double top = 1.0 - epsilon + other;
    double h = top > 0 ? -top * std::log(top) : 0.0;
    if (other > 0) h -= static_cast<double>(n - 1) * other * std::log(other);
    return h;
}

struct DqnAgent {
    nnet::DenseNet q;
    nnet::DenseNet target;
    nnet::AdamState opt;
    ReplayBuffer buffer;
    long env_steps = 0;

    static DqnAgent create(const ScenarioConfig& cfg, std::uint64_t seed, std::size_t num_actions)
    {
        std::vector<std::size_t> sizes{env::kObservationSize};
        for (auto h : cfg.net.hidden) sizes.push_back(h);
        sizes.push_back(num_actions);
        DqnAgent a{nnet::DenseNet(sizes, seed, 1.0), {}, {}, ReplayBuffer(static_cast<std::size_t>(cfg.dqn.buffer))};
        a.target = a.q;
        a.opt = nnet::AdamState(a.q.num_params());
        return a;
    }

    int act(const env::Observation& obs) const { return greedy_action(q.forward(obs)); }
};

/// One TD(0) minibatch step on mean (Q(s,a) - r - gamma max_a' Q_target(s',a'))^2.
/// Returns the loss, or NaN when the buffer is still smaller than a batch.
template <class Engine>
double dqn_td_update(DqnAgent& agent, const DqnConfig& cfg, Engine& rng)
{
    const auto batch = static_cast<std::size_t>(cfg.batch);
    if (agent.buffer.size() < batch) return std::numeric_limits<double>::quiet_NaN();
    std::uniform_int_distribution<std::size_t> pick(0, agent.buffer.size() - 1);
    std::vector<double> grad(agent.q.num_params(), 0.0);
    std::vector<double> gout(agent.q.output_size(), 0.0);
    nnet::DenseNet::Cache cache;
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto& t = agent.buffer[pick(rng)];
        double target = t.reward;
        if (!t.done) {
            const auto qn = agent.target.forward(t.next_obs);
            target += cfg.gamma * *std::max_element(qn.begin(), qn.end());
        }
        const auto q = agent.q.forward(t.obs, cache);
        const double diff = q[static_cast<std::size_t>(t.action)] - target;
        loss += diff * diff * inv;
        std::fill(gout.begin(), gout.end(), 0.0);
        gout[static_cast<std::size_t>(t.action)] = 2.0 * diff * inv;
        agent.q.backward(cache, gout, grad);
    }
    if (!nnet::adam_step(agent.q.mutable_params(), grad, agent.opt, cfg.lr).applied)
        throw NumericError("DQN update produced a non-finite gradient");
    return loss;
}

struct DqnPool {
    std::vector<DqnAgent> agents;
    std::size_t size() const { return agents.size(); }
};

inline nnet::Checkpoint to_checkpoint(const DqnAgent& a, int episode)
{
    return {nnet::CheckpointKind::Dqn, static_cast<std::uint64_t>(episode), {a.q.flatten(), a.target.flatten()}, {a.opt}};
}

inline DqnAgent dqn_from_checkpoint(const nnet::Checkpoint& ck, const DqnConfig& cfg)
{
    if (ck.kind != nnet::CheckpointKind::Dqn || ck.nets.size() != 2 || ck.optimizers.size() != 1)
        throw MissingArtifact("checkpoint does not hold a DQN agent");
    return {nnet::DenseNet::from_params(ck.nets[0]), nnet::DenseNet::from_params(ck.nets[1]), ck.optimizers[0],
            ReplayBuffer(static_cast<std::size_t>(cfg.buffer))};
}

inline void save_dqn_pool(const DqnPool& pool, const std::filesystem::path& run_dir, int episode)
{
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto p = marl::checkpoint_path(run_dir, i, episode);
        std::filesystem::create_directories(p.parent_path());
        nnet::save_checkpoint(p.string(), to_checkpoint(pool.agents[i], episode));
    }
}

inline DqnPool load_dqn_pool(const std::filesystem::path& run_dir, int num_agents, const DqnConfig& cfg)
{
    DqnPool pool;
    for (int i = 0; i < num_agents; ++i) {
        const auto dir = run_dir / ("agent_" + std::to_string(i));
        const auto ck = marl::latest_checkpoint(dir);
        if (!ck) throw MissingArtifact("no checkpoint in '" + dir.string() + "'");
        pool.agents.push_back(dqn_from_checkpoint(nnet::load_checkpoint(ck->string()), cfg));
    }
    return pool;
}

/// Linear epsilon decay over the first `eps_decay_fraction` of training.
inline double dqn_epsilon(const DqnConfig& cfg, int episode, int episodes)
{
    const double horizon = std::max(1.0, cfg.eps_decay_fraction * episodes);
    const double frac = episode / horizon;
    if (frac >= 1.0) return cfg.eps_end;
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

/// Independent per-UE DQN learners on the same global reward as MAPPO, with
/// replay, a target network synced every `dqn.target_sync` environment steps,
/// and one TD minibatch per agent per step. Metrics rows reuse the MAPPO schema:
/// critic_loss carries the mean TD loss, entropy the epsilon-greedy entropy.
inline marl::TrainingRecord train_dqn(const ScenarioConfig& cfg, DqnPool& pool, const marl::TrainOptions& opts = {})
{
    validate(cfg);
    const std::uint64_t master = cfg.train.seed;
    const auto grid = DiscreteActionGrid::from(cfg);
    pool.agents.clear();
    for (int i = 0; i < cfg.env.num_ues; ++i)
        pool.agents.push_back(DqnAgent::create(cfg, derive_seed(master, Stream::DqnInit, i), grid.size()));
    marl::TrainingRecord record;
    if (cfg.train.episodes == 0) return record;

    env::Environment environment(cfg, env::table_for(cfg));
    Rng explore = make_rng(master, Stream::DqnExplore);
    for (int ep = 0; ep < cfg.train.episodes; ++ep) {
        environment.reset(derive_seed(master, Stream::Environment, static_cast<std::uint64_t>(ep)));
        const double eps = dqn_epsilon(cfg.dqn, ep, cfg.train.episodes);
        marl::EpisodeMetrics m;
        m.episode = ep;
        double td_sum = 0.0;
        int td_n = 0;
        while (!environment.done()) {
            std::vector<env::Observation> obs(pool.size());
            std::vector<int> acts(pool.size());
            env::JointAction joint(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i) {
                obs[i] = environment.observe(i);
                acts[i] = epsilon_greedy(pool.agents[i].q.forward(obs[i]), eps, explore);
                joint[i] = grid.action(static_cast<std::size_t>(acts[i]));
            }
            const auto out = environment.step(joint);
            const double r = out.reward + (out.done ? out.terminal_reward : 0.0);
            m.mean_reward += r;
            m.energy_j += out.energy_j;
            ++m.steps;
            if (out.done) m.completion_step = out.completion_step.value_or(-1);
            for (std::size_t i = 0; i < pool.size(); ++i) {
                auto& ag = pool.agents[i];
                ag.buffer.push({obs[i], acts[i], r, environment.observe(i), out.done});
                const double loss = dqn_td_update(ag, cfg.dqn, explore);
                if (std::isfinite(loss)) {
                    td_sum += loss;
                    ++td_n;
                }
                if (++ag.env_steps % cfg.dqn.target_sync == 0) ag.target = ag.q;
            }
        }
        m.critic_loss = td_n ? td_sum / td_n : 0.0;
        m.entropy = epsilon_greedy_entropy(eps, grid.size());
        if (!std::isfinite(m.critic_loss)) {
            if (!opts.run_dir.empty()) save_dqn_pool(pool, opts.run_dir, ep + 1);
            throw NumericError("non-finite TD loss at episode " + std::to_string(ep));
        }
        record.episodes.push_back(m);
        if (opts.on_episode) opts.on_episode(m);
    }
    if (!opts.run_dir.empty()) save_dqn_pool(pool, opts.run_dir, cfg.train.episodes);
    return record;
}

inline env::JointAction dqn_joint_action(const DqnPool& pool, const env::Environment& environment,
                                         const DiscreteActionGrid& grid)
{
    env::JointAction joint(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        joint[i] = grid.action(static_cast<std::size_t>(pool.agents[i].act(environment.observe(i))));
    return joint;
}

} // namespace semoff::baselines

#endif // SEMOFF_BASELINES_HPP
