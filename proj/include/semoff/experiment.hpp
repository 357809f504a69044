#ifndef SEMOFF_EXPERIMENT_HPP
#define SEMOFF_EXPERIMENT_HPP

#include "semoff/baselines.hpp"
#include "semoff/config.hpp"
#include "semoff/env.hpp"
#include "semoff/errors.hpp"
#include "semoff/marl.hpp"
#include "semoff/metrics.hpp"
#include "semoff/rng.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace semoff::experiment {

namespace fs = std::filesystem;

enum class Policy { Mappo, Dqn, Exhaustive, Local, Remote, Random };

inline std::string policy_name(Policy p)
{
    switch (p) {
    case Policy::Mappo: return "mappo";
    case Policy::Dqn: return "dqn";
    case Policy::Exhaustive: return "exhaustive";
    case Policy::Local: return "local";
    case Policy::Remote: return "remote";
    case Policy::Random: return "random";
    }
    return "?";
}

inline Policy parse_policy(const std::string& s)
{
    for (auto p : {Policy::Mappo, Policy::Dqn, Policy::Exhaustive, Policy::Local, Policy::Remote, Policy::Random})
        if (policy_name(p) == s) return p;
    throw ConfigError("unknown policy '" + s + "' (expected mappo, dqn, exhaustive, local, remote or random)");
}

inline std::vector<Policy> static_policies()
{
    return {Policy::Exhaustive, Policy::Local, Policy::Remote, Policy::Random};
}

inline std::vector<Policy> all_policies()
{
    return {Policy::Mappo, Policy::Dqn, Policy::Exhaustive, Policy::Local, Policy::Remote, Policy::Random};
}

struct LearnedPolicies {
    std::optional<marl::AgentPool> mappo;
    std::optional<baselines::DqnPool> dqn;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Results must be written
/// to slot i by the caller, which keeps the output order independent of scheduling.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

/// Snapshot (seed, episode) is a fresh environment reset from
/// derive_seed(seed, Snapshot, episode), played to termination under `policy`.
inline metrics::EvalRow run_snapshot(Policy policy, const ScenarioConfig& cfg, const semantics::AccuracyTable& table,
                                     std::uint64_t seed, int episode, const LearnedPolicies& learned)
{
    env::Environment environment(cfg, table);
    environment.reset(derive_seed(seed, Stream::Snapshot, static_cast<std::uint64_t>(episode)));
    Rng rng = make_rng(seed, Stream::RandomPolicy, static_cast<std::uint64_t>(episode));
    const auto grid = baselines::DiscreteActionGrid::from(cfg);
    const auto n = static_cast<std::size_t>(cfg.env.num_ues);
    if (policy == Policy::Mappo && !learned.mappo) throw MissingArtifact("mappo evaluation needs a trained checkpoint");
    if (policy == Policy::Dqn && !learned.dqn) throw MissingArtifact("dqn evaluation needs a trained checkpoint");
    if (policy == Policy::Mappo && learned.mappo->size() != n)
        throw ConfigError("config key 'env.num_ues': does not match the MAPPO checkpoint's agent count");
    if (policy == Policy::Dqn && learned.dqn->size() != n)
        throw ConfigError("config key 'env.num_ues': does not match the DQN checkpoint's agent count");

    metrics::EvalRow row;
    row.policy = policy_name(policy);
    row.seed = seed;
    row.episode = episode;
    while (!environment.done()) {
        env::JointAction joint(n);
        switch (policy) {
        case Policy::Mappo: joint = marl::greedy_joint_action(*learned.mappo, environment); break;
        case Policy::Dqn: joint = baselines::dqn_joint_action(*learned.dqn, environment, grid); break;
        case Policy::Exhaustive:
            joint = baselines::exhaustive_search(environment, grid, environment.draws(), cfg.exhaustive_max_combinations)
                        .action;
            break;
        case Policy::Local:
        case Policy::Remote:
        case Policy::Random: {
            const auto mode = policy == Policy::Local    ? baselines::StaticMode::Local
                              : policy == Policy::Remote ? baselines::StaticMode::Remote
                                                         : baselines::StaticMode::Random;
            for (auto& a : joint) a = baselines::static_action(mode, cfg.env, rng);
            break;
        }
        }
        const auto out = environment.step(joint);
        row.energy_j += out.energy_j;
        row.violations += out.violations();
        if (out.done) row.completion_step = out.completion_step.value_or(-1);
    }
    return row;
}

/// One row per (policy, seed, snapshot), ordered by policy, then seed, then snapshot.
inline std::vector<metrics::EvalRow> evaluate(const ScenarioConfig& cfg, const std::vector<Policy>& policies,
                                              const std::vector<std::uint64_t>& seeds, int snapshots,
                                              const LearnedPolicies& learned, int jobs = 1)
{
    validate(cfg);
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (snapshots < 1) throw ConfigError("snapshot count must be at least 1");
    const auto table = env::table_for(cfg);
    if (!table.has_k(cfg.semantics.k))
        throw ConfigError("config key 'semantics.k': " + std::to_string(cfg.semantics.k) + " is not in the accuracy table");
    const std::size_t per_policy = seeds.size() * static_cast<std::size_t>(snapshots);
    std::vector<metrics::EvalRow> rows(policies.size() * per_policy);
    parallel_for(rows.size(), jobs, [&](std::size_t idx) {
        const auto p = policies[idx / per_policy];
        const auto rest = idx % per_policy;
        const auto seed = seeds[rest / static_cast<std::size_t>(snapshots)];
        const int ep = static_cast<int>(rest % static_cast<std::size_t>(snapshots));
        rows[idx] = run_snapshot(p, cfg, table, seed, ep, learned);
    });
    return rows;
}

/// Mean and sample standard deviation of energy plus completion rate, per policy.
inline std::vector<metrics::SweepRow> summarize(int k, const std::vector<metrics::EvalRow>& rows)
{
    std::vector<metrics::SweepRow> out;
    for (const auto& r : rows) {
        if (!out.empty() && out.back().policy == r.policy) continue;
        metrics::SweepRow s;
        s.k = k;
        s.policy = r.policy;
        std::vector<double> e;
        int completed = 0;
        for (const auto& q : rows)
            if (q.policy == r.policy) {
                e.push_back(q.energy_j);
                completed += q.completion_step >= 0;
            }
        double mean = 0.0;
        for (double x : e) mean += x;
        mean /= static_cast<double>(e.size());
        double ss = 0.0;
        for (double x : e) ss += (x - mean) * (x - mean);
        s.mean_energy_j = mean;
        s.std_energy_j = e.size() > 1 ? std::sqrt(ss / static_cast<double>(e.size() - 1)) : 0.0;
        s.completion_rate = static_cast<double>(completed) / static_cast<double>(e.size());
        out.push_back(s);
    }
    return out;
}

/// Evaluates the given (non-learned) policies at every k. A k missing from the
/// accuracy table is a configuration error, raised before any work starts.
inline std::vector<metrics::SweepRow> sweep_k(const ScenarioConfig& cfg, const std::vector<int>& ks,
                                              const std::vector<Policy>& policies,
                                              const std::vector<std::uint64_t>& seeds, int snapshots, int jobs = 1)
{
    if (ks.empty()) throw ConfigError("sweep-k needs at least one k");
    const auto table = env::table_for(cfg);
    for (int k : ks)
        if (!table.has_k(k))
            throw ConfigError("config key 'semantics.k': " + std::to_string(k) + " is not in the accuracy table");
    for (auto p : policies)
        if (p == Policy::Mappo || p == Policy::Dqn)
            throw ConfigError("sweep-k evaluates exhaustive, local, remote and random; train learned policies per k with 'train --set semantics.k=K'");
    std::vector<metrics::SweepRow> out;
    for (int k : ks) {
        auto c = cfg;
        c.semantics.k = k;
        const auto rows = evaluate(c, policies, seeds, snapshots, {}, jobs);
        for (auto& s : summarize(k, rows)) out.push_back(s);
    }
    return out;
}

enum class Algorithm { Mappo, Dqn };

inline std::string algorithm_name(Algorithm a) { return a == Algorithm::Mappo ? "mappo" : "dqn"; }

inline fs::path run_dir_for(const fs::path& out, Algorithm algo, std::uint64_t seed)
{
    return out / ("run_" + algorithm_name(algo) + "_s" + std::to_string(seed));
}

/// Trains one run per seed under out/run_<algo>_s<seed>/: config.effective,
/// metrics.jsonl (one row per episode) and agent_<i>/ckpt_<episode>.bin.
inline std::vector<fs::path> train_runs(const ScenarioConfig& cfg, Algorithm algo,
                                        const std::vector<std::uint64_t>& seeds, const fs::path& out, int jobs = 1,
                                        const std::function<void(std::uint64_t, const marl::EpisodeMetrics&)>& progress = {})
{
    validate(cfg);
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    std::vector<fs::path> dirs(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        dirs[s] = run_dir_for(out, algo, seeds[s]);
        fs::create_directories(dirs[s]);
    }
    parallel_for(seeds.size(), jobs, [&](std::size_t s) {
        auto c = cfg;
        c.train.seed = seeds[s];
        {
            std::ofstream eff(dirs[s] / "config.effective");
            eff << dump_config(c);
        }
        std::ofstream jsonl(dirs[s] / "metrics.jsonl", std::ios::trunc);
        if (!jsonl) throw ConfigError("output directory '" + dirs[s].string() + "' is not writable");
        marl::TrainOptions opts;
        opts.run_dir = dirs[s].string();
        opts.on_episode = [&](const marl::EpisodeMetrics& m) {
            jsonl << metrics::to_json_line(m) << '\n';
            if (progress) progress(seeds[s], m);
        };
        if (algo == Algorithm::Mappo) {
            marl::AgentPool pool;
            marl::train(c, pool, opts);
        } else {
            baselines::DqnPool pool;
            baselines::train_dqn(c, pool, opts);
        }
    });
    return dirs;
}

inline void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

} // namespace semoff::experiment

#endif // SEMOFF_EXPERIMENT_HPP
