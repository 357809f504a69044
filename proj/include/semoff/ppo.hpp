#ifndef SEMOFF_PPO_HPP
#define SEMOFF_PPO_HPP

#include "semoff/config.hpp"
#include "semoff/env.hpp"
#include "semoff/errors.hpp"
#include "semoff/nnet.hpp"
#include "semoff/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace semoff::ppo {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr std::size_t kPolicyOutputs = 5;
inline constexpr double kLog2Pi = 1.8378770664093453;

struct ActionBounds {
    double p_min = 0.0, p_max = 1.0;
    double f_min = 0.0, f_max = 1.0;
    double f_idle = 0.0;

    static ActionBounds from(const EnvConfig& e) { return {e.p_min_w, e.p_max_w, e.f_min_hz, e.f_max_hz, e.f_idle_hz}; }
};

/// Actor head: Bernoulli logit for the offload flag and a tanh-squashed
/// Gaussian each for power and frequency. Log-stds are clamped to [-5, 2].
struct HybridPolicyOutput {
    double logit = 0.0;
    double mean_p = 0.0, log_std_p = 0.0;
    double mean_f = 0.0, log_std_f = 0.0;

    static HybridPolicyOutput from_raw(std::span<const double> raw)
    {
        if (raw.size() != kPolicyOutputs) throw ShapeError("HybridPolicyOutput: expected 5 raw outputs");
        return {raw[0], raw[1], std::clamp(raw[2], kLogStdMin, kLogStdMax), raw[3],
                std::clamp(raw[4], kLogStdMin, kLogStdMax)};
    }
};

/// Sampled action. `u_p`/`u_f` are the pre-squash Gaussian draws; both are
/// kept even when the environment ignores one of them.
struct HybridAction {
    int rho = 0;
    double u_p = 0.0, u_f = 0.0;
    double power_w = 0.0, freq_hz = 0.0;

    /// Offloading forces f to idle, local execution forces p to zero.
    env::UeAction to_env(const ActionBounds& b) const
    {
        return rho ? env::UeAction{1, power_w, b.f_idle} : env::UeAction{0, 0.0, freq_hz};
    }
};

inline double squash(double u, double lo, double hi) { return lo + 0.5 * (std::tanh(u) + 1.0) * (hi - lo); }

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// log(sigmoid(z)), stable for large |z|.
inline double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

inline double gaussian_log_density(double u, double mean, double log_std)
{
    const double z = (u - mean) / std::exp(log_std);
    return -0.5 * z * z - log_std - 0.5 * kLog2Pi;
}

/// log |d squash / du| = log((hi-lo)/2) + log(1 - tanh(u)^2).
inline double squash_log_jacobian(double u, double lo, double hi)
{
    if (!(hi > lo)) return 0.0;
    const double a = std::abs(u);
    return std::log(0.5 * (hi - lo)) + 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

inline double log_prob(const HybridPolicyOutput& out, const HybridAction& a, const ActionBounds& b)
{
    const double lp_rho = a.rho ? log_sigmoid(out.logit) : log_sigmoid(-out.logit);
    const double lp_p = gaussian_log_density(a.u_p, out.mean_p, out.log_std_p) - squash_log_jacobian(a.u_p, b.p_min, b.p_max);
    const double lp_f = gaussian_log_density(a.u_f, out.mean_f, out.log_std_f) - squash_log_jacobian(a.u_f, b.f_min, b.f_max);
    return lp_rho + lp_p + lp_f;
}

struct Sample {
    HybridAction action;
    double logprob = 0.0;
};

template <class Engine>
Sample act(const HybridPolicyOutput& out, const ActionBounds& b, Engine& rng)
{
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    HybridAction a;
    a.rho = uni(rng) < sigmoid(out.logit) ? 1 : 0;
    a.u_p = out.mean_p + std::exp(out.log_std_p) * normal(rng);
    a.u_f = out.mean_f + std::exp(out.log_std_f) * normal(rng);
    a.power_w = squash(a.u_p, b.p_min, b.p_max);
    a.freq_hz = squash(a.u_f, b.f_min, b.f_max);
    return {a, log_prob(out, a, b)};
}

/// Deterministic action used for evaluation: offload iff logit > 0, Gaussian means.
inline HybridAction mode(const HybridPolicyOutput& out, const ActionBounds& b)
{
    HybridAction a;
    a.rho = out.logit > 0 ? 1 : 0;
    a.u_p = out.mean_p;
    a.u_f = out.mean_f;
    a.power_w = squash(a.u_p, b.p_min, b.p_max);
    a.freq_hz = squash(a.u_f, b.f_min, b.f_max);
    return a;
}

inline double bernoulli_entropy(double logit)
{
    const double s = sigmoid(logit);
    return -(s * log_sigmoid(logit) + (1.0 - s) * log_sigmoid(-logit));
}

/// Bernoulli entropy plus the two pre-squash Gaussian entropies.
inline double entropy(const HybridPolicyOutput& out)
{
    return bernoulli_entropy(out.logit) + (0.5 * (kLog2Pi + 1.0) + out.log_std_p) +
           (0.5 * (kLog2Pi + 1.0) + out.log_std_f);
}

inline bool log_std_free(double raw) { return raw >= kLogStdMin && raw <= kLogStdMax; }

/// d log_prob / d raw outputs. Jacobian terms do not depend on parameters.
inline std::array<double, kPolicyOutputs> log_prob_grad(std::span<const double> raw, const HybridAction& a)
{
    const auto out = HybridPolicyOutput::from_raw(raw);
    std::array<double, kPolicyOutputs> g{};
    g[0] = a.rho - sigmoid(out.logit);
    const double zp = (a.u_p - out.mean_p) / std::exp(out.log_std_p);
    const double zf = (a.u_f - out.mean_f) / std::exp(out.log_std_f);
    g[1] = zp / std::exp(out.log_std_p);
    g[2] = log_std_free(raw[2]) ? zp * zp - 1.0 : 0.0;
    g[3] = zf / std::exp(out.log_std_f);
    g[4] = log_std_free(raw[4]) ? zf * zf - 1.0 : 0.0;
    return g;
}

inline std::array<double, kPolicyOutputs> entropy_grad(std::span<const double> raw)
{
    const double s = sigmoid(raw[0]);
    return {-raw[0] * s * (1.0 - s), 0.0, log_std_free(raw[2]) ? 1.0 : 0.0, 0.0, log_std_free(raw[4]) ? 1.0 : 0.0};
}

// --- trajectories and advantages -------------------------------------------

struct TrajectoryStep {
    env::Observation obs{};
    HybridAction action;
    double logprob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    double bootstrap_value = 0.0; // V(o_T) when the last step is not terminal
};

struct GaeConfig {
    double gamma = 0.95;
    double lambda = 0.95;
};

/// Backward recursion A_t = delta_t + gamma lambda (1 - done_t) A_{t+1},
/// delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t.
inline std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                          std::span<const bool> dones, double bootstrap_value, const GaeConfig& cfg)
{
    const std::size_t n = rewards.size();
    if (n == 0) throw std::invalid_argument("gae_advantages: empty trajectory");
    if (values.size() != n || dones.size() != n) throw ShapeError("gae_advantages: length mismatch");
    // The closed range admits the one-step TD (lambda = 0) and reward-to-go (gamma = 1) limits.
    if (!(cfg.gamma > 0 && cfg.gamma <= 1) || !(cfg.lambda >= 0 && cfg.lambda <= 1))
        throw std::invalid_argument("gae_advantages: gamma must be in (0,1], lambda in [0,1]");
    std::vector<double> adv(n);
    double next_adv = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double live = dones[t] ? 0.0 : 1.0;
        const double next_v = t + 1 < n ? values[t + 1] : bootstrap_value;
        const double delta = rewards[t] + cfg.gamma * live * next_v - values[t];
        next_adv = delta + cfg.gamma * cfg.lambda * live * next_adv;
        adv[t] = next_adv;
    }
    return adv;
}

inline std::vector<double> gae_advantages(const Trajectory& traj, const GaeConfig& cfg)
{
    std::vector<double> r, v;
    std::vector<char> d;
    for (const auto& s : traj.steps) {
        r.push_back(s.reward);
        v.push_back(s.value);
        d.push_back(s.done);
    }
    std::unique_ptr<bool[]> flags(new bool[d.size()]);
    for (std::size_t i = 0; i < d.size(); ++i) flags[i] = d[i] != 0;
    return gae_advantages(r, v, std::span<const bool>(flags.get(), d.size()), traj.bootstrap_value, cfg);
}

// --- clipped surrogate --------------------------------------------------------

/// g(eps, A) = (1 + eps) A for A >= 0, (1 - eps) A otherwise.
inline double clip_g(double epsilon, double advantage)
{
    return advantage >= 0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
}

struct SurrogateTerm {
    double value = 0.0;
    bool clipped = false;
    double dvalue_dratio = 0.0;
};

/// min(ratio A, g(eps, A)); flat (zero derivative) where the clip is active.
inline SurrogateTerm clipped_surrogate(double ratio, double advantage, double epsilon)
{
    const double unclipped = ratio * advantage;
    const double g = clip_g(epsilon, advantage);
    if (unclipped <= g) return {unclipped, false, advantage};
    return {g, true, 0.0};
}

struct PpoSample {
    env::Observation obs{};
    HybridAction action;
    double old_logprob = 0.0;
    double advantage = 0.0;
    double ret = 0.0; // critic target
};

using PpoBatch = std::vector<PpoSample>;

/// Advantages via GAE; critic targets R_t = A_t + V(o_t).
inline PpoBatch build_batch(const Trajectory& traj, const GaeConfig& cfg)
{
    const auto adv = gae_advantages(traj, cfg);
    PpoBatch b;
    b.reserve(traj.steps.size());
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& s = traj.steps[t];
        b.push_back({s.obs, s.action, s.logprob, adv[t], adv[t] + s.value});
    }
    return b;
}

inline void normalize_advantages(PpoBatch& batch)
{
    if (batch.empty()) return;
    double mean = 0.0;
    for (const auto& s : batch) mean += s.advantage;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
    const double sd = std::sqrt(var / static_cast<double>(batch.size()));
    for (auto& s : batch) s.advantage = sd > 1e-12 ? (s.advantage - mean) / sd : s.advantage - mean;
}

struct ActorObjective {
    double objective = 0.0;          // mean clipped surrogate (to maximise)
    double entropy = 0.0;            // mean policy entropy
    std::vector<double> grad;        // d objective / d actor params
    std::vector<double> entropy_grad; // d mean entropy / d actor params
    double clip_fraction = 0.0;
    double mean_ratio = 0.0;
    int excluded = 0; // samples dropped for a non-finite ratio
};

inline ActorObjective clipped_actor_loss(std::span<const PpoSample> batch, const nnet::DenseNet& actor,
                                         const ActionBounds& bounds, double epsilon)
{
    ActorObjective r;
    r.grad.assign(actor.num_params(), 0.0);
    r.entropy_grad.assign(actor.num_params(), 0.0);
    std::vector<double> obj_g(actor.num_params(), 0.0), ent_g(actor.num_params(), 0.0);
    nnet::DenseNet::Cache cache;
    int used = 0, clipped = 0;
    for (const auto& s : batch) {
        const auto raw = actor.forward(s.obs, cache);
        const auto out = HybridPolicyOutput::from_raw(raw);
        const double ratio = std::exp(log_prob(out, s.action, bounds) - s.old_logprob);
        if (!std::isfinite(ratio)) {
            ++r.excluded;
            continue;
        }
        ++used;
        const auto term = clipped_surrogate(ratio, s.advantage, epsilon);
        r.objective += term.value;
        r.mean_ratio += ratio;
        clipped += term.clipped;
        r.entropy += entropy(out);

        std::array<double, kPolicyOutputs> gout{};
        const double dlogp = term.dvalue_dratio * ratio;
        if (dlogp != 0.0) {
            const auto lg = log_prob_grad(raw, s.action);
            for (std::size_t k = 0; k < kPolicyOutputs; ++k) gout[k] = dlogp * lg[k];
            actor.backward(cache, gout, obj_g);
        }
        const auto eg = entropy_grad(raw);
        actor.backward(cache, eg, ent_g);
    }
    if (used > 0) {
        const double inv = 1.0 / used;
        r.objective *= inv;
        r.mean_ratio *= inv;
        r.entropy *= inv;
        r.clip_fraction = clipped * inv;
        for (std::size_t i = 0; i < r.grad.size(); ++i) {
            r.grad[i] = obj_g[i] * inv;
            r.entropy_grad[i] = ent_g[i] * inv;
        }
    }
    return r;
}

struct CriticObjective {
    double loss = 0.0;       // mean (V - R)^2
    std::vector<double> grad; // d loss / d critic params
};

inline CriticObjective critic_loss(std::span<const PpoSample> batch, const nnet::DenseNet& critic)
{
    CriticObjective r;
    r.grad.assign(critic.num_params(), 0.0);
    if (batch.empty()) return r;
    nnet::DenseNet::Cache cache;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        const double v = critic.forward(s.obs, cache)[0];
        const double diff = v - s.ret;
        r.loss += diff * diff * inv;
        const double g = 2.0 * diff * inv;
        critic.backward(cache, std::span<const double>(&g, 1), r.grad);
    }
    return r;
}

// --- agent and update -------------------------------------------------------

struct PpoAgent {
    nnet::DenseNet actor;
    nnet::DenseNet critic;
    nnet::AdamState actor_opt;
    nnet::AdamState critic_opt;

    static PpoAgent create(const NetConfig& net, std::uint64_t actor_seed, std::uint64_t critic_seed)
    {
        std::vector<std::size_t> a{env::kObservationSize}, c{env::kObservationSize};
        for (auto h : net.hidden) {
            a.push_back(h);
            c.push_back(h);
        }
        a.push_back(kPolicyOutputs);
        c.push_back(1);
        PpoAgent ag{nnet::DenseNet(a, actor_seed, net.actor_output_gain), nnet::DenseNet(c, critic_seed, 1.0), {}, {}};
        ag.actor_opt = nnet::AdamState(ag.actor.num_params());
        ag.critic_opt = nnet::AdamState(ag.critic.num_params());
        return ag;
    }

    HybridPolicyOutput policy(const env::Observation& obs) const { return HybridPolicyOutput::from_raw(actor.forward(obs)); }
    double value(const env::Observation& obs) const { return critic.forward(obs)[0]; }
};

struct UpdateStats {
    double actor_loss = 0.0; // negated clipped objective
    double critic_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double mean_ratio = 0.0;
    int rejected_steps = 0;
    int excluded = 0;
};

/// K epochs of shuffled minibatch ascent on L_clip - c1 L_cr + c2 H.
/// Reported losses are averaged over all minibatch evaluations.
template <class Engine>
UpdateStats combined_update(PpoAgent& agent, PpoBatch batch, const PpoConfig& cfg, const ActionBounds& bounds,
                            Engine& rng)
{
    if (batch.empty()) throw std::invalid_argument("combined_update: empty batch");
    if (cfg.normalize_advantages) normalize_advantages(batch);
    UpdateStats st;
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t mb = static_cast<std::size_t>(std::max(1, cfg.minibatch));
    int evals = 0;
    PpoBatch chunk;
    std::vector<double> actor_grad(agent.actor.num_params()), critic_grad(agent.critic.num_params());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += mb) {
            chunk.clear();
            for (std::size_t j = start; j < std::min(order.size(), start + mb); ++j) chunk.push_back(batch[order[j]]);
            const auto a = clipped_actor_loss(chunk, agent.actor, bounds, cfg.clip);
            const auto c = critic_loss(chunk, agent.critic);
            for (std::size_t i = 0; i < actor_grad.size(); ++i)
                actor_grad[i] = -(a.grad[i] + cfg.c2 * a.entropy_grad[i]);
            for (std::size_t i = 0; i < critic_grad.size(); ++i) critic_grad[i] = cfg.c1 * c.grad[i];
            st.actor_loss += -a.objective;
            st.critic_loss += c.loss;
            st.entropy += a.entropy;
            st.clip_fraction += a.clip_fraction;
            st.mean_ratio += a.mean_ratio;
            st.excluded += a.excluded;
            ++evals;
            if (!nnet::adam_step(agent.actor.mutable_params(), actor_grad, agent.actor_opt, cfg.lr).applied)
                ++st.rejected_steps;
            if (!nnet::adam_step(agent.critic.mutable_params(), critic_grad, agent.critic_opt, cfg.lr).applied)
                ++st.rejected_steps;
        }
    }
    const double inv = 1.0 / evals;
    st.actor_loss *= inv;
    st.critic_loss *= inv;
    st.entropy *= inv;
    st.clip_fraction *= inv;
    st.mean_ratio *= inv;
    return st;
}

} // namespace semoff::ppo

#endif // SEMOFF_PPO_HPP
