#ifndef SEMOFF_ENV_HPP
#define SEMOFF_ENV_HPP

#include "semoff/channel.hpp"
#include "semoff/config.hpp"
#include "semoff/errors.hpp"
#include "semoff/rng.hpp"
#include "semoff/semantics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace semoff::env {

struct TaskSpec {
    int queue_len = 0;               // d, sentences left
    double flops_per_sentence = 0.0; // l
    double max_latency_s = 0.0;      // tau_max per sentence
};

struct Position {
    double x = 0.0;
    double y = 0.0;
};

struct UEState {
    Position position;
    double battery_j = 0.0;
    TaskSpec task;
    double distance_m = 0.0;
};

struct UeAction {
    int rho = 0;
    double power_w = 0.0;
    double freq_hz = 0.0;
};

using JointAction = std::vector<UeAction>;

/// Constraint slots, in the order of the energy-minimization problem.
enum Constraint : std::size_t {
    kAccuracy = 0,  // eps >= eps_min
    kBinary = 1,    // rho in {0,1}
    kPower = 2,     // p <= p_max
    kFrequency = 3, // f <= f_max
    kLatency = 4,   // t <= tau_max
    kBattery = 5,   // E <= remaining battery
    kNumConstraints = 6,
};

struct UeOutcome {
    bool active = false; // queue was nonempty at the start of the step
    bool rejected = false; // action malformed or unaffordable: nothing executed
    int rho = 0;
    double power_w = 0.0;
    double freq_hz = 0.0;
    double snr = 0.0;
    double eps = 0.0;
    double t_lc = 0.0, t_ut = 0.0, t_rc = 0.0, t_dl = 0.0, t_total = 0.0;
    double e_lc = 0.0, e_ut = 0.0, e_rc = 0.0;
    std::array<bool, kNumConstraints> ok{true, true, true, true, true, true};
    bool sentence_completed = false;

    bool feasible() const { return std::all_of(ok.begin(), ok.end(), [](bool b) { return b; }); }
    int violations() const { return static_cast<int>(std::count(ok.begin(), ok.end(), false)); }
    double energy() const { return e_lc + e_ut; }
};

struct StepOutcome {
    std::vector<UeOutcome> ue;
    double energy_j = 0.0; // sum of E^lc + E^ut
    double reward = 0.0;   // xi_t - scale * energy
    int step = 0;          // 1-based index of this step
    bool done = false;
    std::optional<int> completion_step; // t0 when all queues emptied
    double terminal_reward = 0.0;       // valid when done

    bool all_feasible() const
    {
        return std::all_of(ue.begin(), ue.end(), [](const UeOutcome& u) { return u.feasible(); });
    }
    int violations() const
    {
        int v = 0;
        for (const auto& u : ue) v += u.violations();
        return v;
    }
};

/// t^lc = l / (n f) for one sentence.
inline double local_latency(double flops, double flops_per_cycle, double freq_hz)
{
    if (!(freq_hz > 0)) throw std::domain_error("local_latency: frequency must be positive");
    return flops / (flops_per_cycle * freq_hz);
}

/// E^lc = alpha t f^3.
inline double local_energy(double t_lc, double freq_hz, double alpha) { return alpha * t_lc * freq_hz * freq_hz * freq_hz; }

/// t^ut = rho A^w k / (W eps) for one sentence; +inf when offloading with eps = 0.
inline double upload_latency(int rho, const semantics::SemanticSourceStats& stats, double bandwidth_hz, double eps)
{
    if (rho == 0) return 0.0;
    if (!(eps > 0)) return std::numeric_limits<double>::infinity();
    return stats.avg_words * stats.symbols_per_word / (bandwidth_hz * eps);
}

inline double upload_energy(double power_w, double t_ut) { return power_w * t_ut; }

/// t^rc = l / (n^rc f^rc / sum rho). The ES capacity is split evenly among offloaders.
inline double remote_latency(double flops, double remote_flops_per_cycle, double remote_freq_hz, int num_offloaders)
{
    if (num_offloaders < 1) throw std::domain_error("remote_latency: no offloaders");
    return flops * num_offloaders / (remote_flops_per_cycle * remote_freq_hz);
}

/// E^rc = beta t^rc (f^rc / sum rho)^3. Reported only; not part of the UE objective.
inline double remote_energy(double t_rc, double remote_freq_hz, int num_offloaders, double beta)
{
    const double share = remote_freq_hz / num_offloaders;
    return beta * t_rc * share * share * share;
}

inline double total_latency(int rho, double t_ut, double t_rc, double t_dl, double t_lc)
{
    return rho ? (t_ut + t_rc + t_dl) : t_lc;
}

/// End-of-episode bonus: xi_T I (T - t0) when all queues emptied at t0, else -xi_T sum d_i(T).
inline double terminal_reward(std::optional<int> completion_step, int max_steps, const std::vector<int>& queues_at_end,
                              double xi_terminal)
{
    if (completion_step && *completion_step <= max_steps)
        return xi_terminal * static_cast<double>(queues_at_end.size()) * (max_steps - *completion_step);
    double left = 0.0;
    for (int d : queues_at_end) left += d;
    return -xi_terminal * left;
}

inline constexpr std::size_t kObservationSize = 6;
using Observation = std::array<double, kObservationSize>;

/// Reference scales for the task components of the observation.
inline constexpr double kFlopsRef = 2.2e10;
inline constexpr double kLatencyRef = 0.05;

/// Multi-UE episodic environment around one edge server at the area centre.
///
/// Each step every UE with a nonempty queue attempts one sentence. Fading is
/// redrawn after every step from the environment's own stream, so the fading
/// sequence depends only on the reset seed, never on the actions taken.
class Environment {
public:
    Environment(ScenarioConfig cfg, semantics::AccuracyTable table) : cfg_(std::move(cfg)), table_(std::move(table))
    {
        validate(cfg_);
        table_.k_index(cfg_.semantics.k);
        stats_ = {cfg_.semantics.avg_semantic_units, cfg_.semantics.avg_words, cfg_.semantics.k};
    }

    const ScenarioConfig& config() const { return cfg_; }
    const semantics::AccuracyTable& table() const { return table_; }
    const semantics::SemanticSourceStats& source_stats() const { return stats_; }
    int num_ues() const { return cfg_.env.num_ues; }

    void reset(std::uint64_t seed)
    {
        Rng placement = make_rng(seed, Stream::Environment);
        fading_ = make_rng(seed, Stream::Fading);
        std::uniform_real_distribution<double> u(0.0, cfg_.env.area_m);
        ues_.assign(static_cast<std::size_t>(cfg_.env.num_ues), {});
        gains_.assign(ues_.size(), 0.0);
        for (std::size_t i = 0; i < ues_.size(); ++i) {
            auto& ue = ues_[i];
            ue.position.x = u(placement);
            ue.position.y = u(placement);
            ue.battery_j = cfg_.env.battery_j;
            ue.task = {cfg_.env.queue_len, cfg_.env.effective_flops(), cfg_.env.max_latency_s};
        }
        refresh_geometry();
        step_ = 0;
        done_ = false;
        completion_step_.reset();
        energy_spent_ = 0.0;
        if (all_queues_empty()) {
            done_ = true;
            completion_step_ = 0;
        }
        redraw();
    }

    const std::vector<UEState>& ues() const { return ues_; }

    /// Scenario set-up hook for tests and tools: edit UE state, then call refresh_geometry()
    /// if positions changed.
    std::vector<UEState>& mutable_ues() { return ues_; }

    void refresh_geometry()
    {
        const double centre = cfg_.env.area_m / 2.0;
        for (std::size_t i = 0; i < ues_.size(); ++i) {
            ues_[i].distance_m = std::hypot(ues_[i].position.x - centre, ues_[i].position.y - centre);
            gains_[i] = channel::pathloss_gain(ues_[i].distance_m, cfg_.channel.carrier_hz, cfg_.channel);
        }
        for (std::size_t i = 0; i < draws_.size() && i < gains_.size(); ++i) draws_[i].large_scale_gain = gains_[i];
    }

    const std::vector<channel::ChannelDraw>& draws() const { return draws_; }
    void set_draws(std::vector<channel::ChannelDraw> d)
    {
        if (d.size() != ues_.size()) throw ShapeError("set_draws: one draw per UE required");
        draws_ = std::move(d);
    }

    int step_index() const { return step_; }
    bool done() const { return done_; }
    std::optional<int> completion_step() const { return completion_step_; }
    double energy_spent() const { return energy_spent_; }

    std::vector<int> queues() const
    {
        std::vector<int> q;
        for (const auto& ue : ues_) q.push_back(ue.task.queue_len);
        return q;
    }

    bool all_queues_empty() const
    {
        return std::all_of(ues_.begin(), ues_.end(), [](const UEState& u) { return u.task.queue_len == 0; });
    }

    /// Normalised local observation [x, y, battery, queue, load, deadline].
    Observation observe(std::size_t i) const
    {
        const auto& ue = ues_.at(i);
        const double d0 = cfg_.env.queue_len > 0 ? cfg_.env.queue_len : 1;
        return {ue.position.x / cfg_.env.area_m,
                ue.position.y / cfg_.env.area_m,
                ue.battery_j / cfg_.env.battery_j,
                ue.task.queue_len / d0,
                ue.task.flops_per_sentence / kFlopsRef,
                ue.task.max_latency_s / kLatencyRef};
    }

    /// Evaluates a joint action against explicit draws without touching state.
    StepOutcome evaluate(const JointAction& actions, const std::vector<channel::ChannelDraw>& draws) const
    {
        if (actions.size() != ues_.size()) throw ShapeError("evaluate: one action per UE required");
        if (draws.size() != ues_.size()) throw ShapeError("evaluate: one draw per UE required");
        const auto& e = cfg_.env;
        StepOutcome out;
        out.ue.resize(ues_.size());
        out.step = step_ + 1;

        int offloaders = 0;
        for (std::size_t i = 0; i < ues_.size(); ++i) {
            auto& o = out.ue[i];
            const auto& a = actions[i];
            o.active = ues_[i].task.queue_len > 0;
            if (!o.active) continue;
            if (a.rho != 0 && a.rho != 1) {
                o.ok[kBinary] = false;
                o.rejected = true;
                continue;
            }
            o.rho = a.rho;
            if (a.rho == 1) {
                o.power_w = a.power_w;
                o.freq_hz = e.f_idle_hz;
                if (!(a.power_w >= 0.0 && a.power_w <= e.p_max_w)) {
                    o.ok[kPower] = false;
                    o.rejected = true;
                    continue;
                }
                ++offloaders;
            } else {
                o.power_w = 0.0;
                o.freq_hz = a.freq_hz;
                if (!(a.freq_hz >= e.f_min_hz && a.freq_hz <= e.f_max_hz)) {
                    o.ok[kFrequency] = false;
                    o.rejected = true;
                    continue;
                }
            }
        }

        for (std::size_t i = 0; i < ues_.size(); ++i) {
            auto& o = out.ue[i];
            if (!o.active || o.rejected) continue;
            const auto& ue = ues_[i];
            const double flops = ue.task.flops_per_sentence;
            if (o.rho == 1) {
                o.snr = channel::snr(1, o.power_w, draws[i]);
                o.eps = semantics::similarity(table_, cfg_.semantics.k, o.snr);
                o.t_ut = upload_latency(1, stats_, draws[i].subband_bw_hz, o.eps);
                // An upload that can never finish is abandoned at the deadline.
                o.e_ut = std::isfinite(o.t_ut) ? upload_energy(o.power_w, o.t_ut)
                                               : upload_energy(o.power_w, ue.task.max_latency_s);
                o.t_rc = remote_latency(flops, e.remote_flops_per_cycle, e.remote_freq_hz, offloaders);
                o.e_rc = remote_energy(o.t_rc, e.remote_freq_hz, offloaders, e.beta);
                o.t_dl = e.download_latency_s;
                o.ok[kAccuracy] = o.eps >= e.eps_min;
            } else {
                o.t_lc = local_latency(flops, e.local_flops_per_cycle, o.freq_hz);
                o.e_lc = local_energy(o.t_lc, o.freq_hz, e.alpha);
            }
            o.t_total = total_latency(o.rho, o.t_ut, o.t_rc, o.t_dl, o.t_lc);
            o.ok[kLatency] = o.t_total <= ue.task.max_latency_s;
            if (o.e_lc + o.e_ut > ue.battery_j) {
                o.ok[kBattery] = false;
                o.rejected = true;
                o.e_lc = o.e_ut = o.e_rc = 0.0;
            }
        }

        for (auto& o : out.ue) {
            o.sentence_completed = o.active && o.feasible();
            out.energy_j += o.energy();
        }
        out.reward = e.xi_step - e.reward_energy_scale * out.energy_j;
        return out;
    }

    /// Applies the joint action on the current draws, advances time and redraws fading.
    StepOutcome step(const JointAction& actions)
    {
        if (done_) throw std::logic_error("step: episode already terminated");
        StepOutcome out = evaluate(actions, draws_);
        for (std::size_t i = 0; i < ues_.size(); ++i) {
            auto& ue = ues_[i];
            const auto& o = out.ue[i];
            ue.battery_j = std::max(0.0, ue.battery_j - o.energy());
            energy_spent_ += o.energy();
            if (o.sentence_completed) --ue.task.queue_len;
        }
        step_ = out.step;
        if (all_queues_empty()) {
            done_ = true;
            completion_step_ = step_;
        } else if (step_ >= cfg_.env.max_steps) {
            done_ = true;
        }
        if (done_) {
            out.done = true;
            out.completion_step = completion_step_;
            out.terminal_reward = terminal_reward(completion_step_, cfg_.env.max_steps, queues(), cfg_.env.xi_terminal);
        }
        redraw();
        return out;
    }

private:
    void redraw()
    {
        draws_.resize(ues_.size());
        for (std::size_t i = 0; i < ues_.size(); ++i) {
            draws_[i].large_scale_gain = gains_[i];
            draws_[i].rayleigh_coeff_sq = channel::draw_fading(fading_);
            draws_[i].subband_bw_hz = cfg_.channel.subband_bw_hz;
            draws_[i].noise_psd_w_hz = cfg_.channel.noise_psd_w_hz;
        }
    }

    ScenarioConfig cfg_;
    semantics::AccuracyTable table_;
    semantics::SemanticSourceStats stats_;
    std::vector<UEState> ues_;
    std::vector<double> gains_;
    std::vector<channel::ChannelDraw> draws_;
    Rng fading_;
    int step_ = 0;
    bool done_ = true;
    std::optional<int> completion_step_;
    double energy_spent_ = 0.0;
};

/// Loads the table named by the config, or the built-in default.
inline semantics::AccuracyTable table_for(const ScenarioConfig& cfg)
{
    return cfg.semantics.table_path.empty() ? semantics::default_table()
                                            : semantics::load_table_csv(cfg.semantics.table_path);
}

} // namespace semoff::env

#endif // SEMOFF_ENV_HPP
