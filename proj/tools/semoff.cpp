// semoff: train, evaluate and compare offloading policies.

#include "semoff/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>

namespace {

using namespace semoff;
namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::string profile = "paper";
    std::vector<std::string> sets;
    std::string seeds = "1";
    std::string out = "out";
    int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config_path, "Scenario file of key=value lines");
    cmd->add_option("--profile", c.profile, "Parameter bundle: paper|fast")->capture_default_str();
    cmd->add_option("--set", c.sets, "Override one config key (key=value), repeatable");
    cmd->add_option("--seed", c.seeds, "Seed or comma-separated seed list")->capture_default_str();
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s)
{
    std::vector<std::uint64_t> out;
    for (const auto& item : split(s)) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.front() == '-') throw ConfigError("--seed: '" + item + "' is not a seed");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--seed: at least one seed is required");
    return out;
}

std::vector<int> parse_ks(const std::string& s)
{
    std::vector<int> out;
    for (const auto& item : split(s)) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size()) throw ConfigError("--k: '" + item + "' is not an integer");
        out.push_back(v);
    }
    return out;
}

// built-in defaults < profile < config file < command-line flags
ScenarioConfig resolve(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags = {})
{
    auto cfg = make_config(parse_profile(c.profile));
    if (!c.config_path.empty()) apply_config_file(cfg, c.config_path);
    for (const auto& [k, v] : flags) set_config_value(cfg, k, v);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
}

std::vector<experiment::Policy> parse_policies(const std::string& s)
{
    std::vector<experiment::Policy> out;
    for (const auto& item : split(s)) out.push_back(experiment::parse_policy(item));
    if (out.empty()) throw ConfigError("--policy: at least one policy is required");
    return out;
}

experiment::LearnedPolicies load_learned(const std::vector<experiment::Policy>& policies, const ScenarioConfig& cfg,
                                         const std::string& mappo_dir, const std::string& dqn_dir)
{
    experiment::LearnedPolicies learned;
    for (auto p : policies) {
        if (p == experiment::Policy::Mappo && !learned.mappo) {
            if (mappo_dir.empty()) throw MissingArtifact("policy 'mappo' needs --mappo RUN_DIR");
            learned.mappo = marl::load_pool(mappo_dir, cfg.env.num_ues);
        }
        if (p == experiment::Policy::Dqn && !learned.dqn) {
            if (dqn_dir.empty()) throw MissingArtifact("policy 'dqn' needs --dqn RUN_DIR");
            learned.dqn = baselines::load_dqn_pool(dqn_dir, cfg.env.num_ues, cfg.dqn);
        }
    }
    return learned;
}

void write_eval(const fs::path& out, const std::string& name, const ScenarioConfig& cfg,
                const std::vector<metrics::EvalRow>& rows)
{
    std::ostringstream os;
    metrics::write_eval_csv(os, rows);
    std::istringstream back(os.str());
    metrics::read_eval_csv(back);
    experiment::write_file(out / name, os.str());
    experiment::write_file(out / "config.effective", dump_config(cfg));
    spdlog::info("wrote {} rows to {}", rows.size(), (out / name).string());
}

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("semoff");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("SEMOFF_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

} // namespace

int main(int argc, char** argv)
{
    setup_logging();
    CLI::App app{"Semantic-aware task offloading: federated MAPPO and baselines"};
    app.require_subcommand(1);

    Common c;

    auto* train = app.add_subcommand("train", "Train MAPPO or DQN agents; one run directory per seed");
    add_common(train, c);
    std::string algo = "mappo";
    int episodes = -1;
    train->add_option("--algo", algo, "mappo|dqn")->check(CLI::IsMember({"mappo", "dqn"}))->capture_default_str();
    train->add_option("--episodes", episodes, "Training episodes (overrides train.episodes)");

    std::string policy = "exhaustive,local,remote,random";
    int snapshots = 100;
    std::string mappo_dir, dqn_dir;

    auto* eval = app.add_subcommand("eval", "Evaluate policies on seeded snapshots");
    add_common(eval, c);
    eval->add_option("--policy", policy, "Comma-separated policies")->capture_default_str();
    eval->add_option("--snapshots", snapshots, "Snapshots per seed")->capture_default_str();
    eval->add_option("--mappo", mappo_dir, "MAPPO run directory");
    eval->add_option("--dqn", dqn_dir, "DQN run directory");

    bool static_only = false;
    auto* compare = app.add_subcommand("compare", "Evaluate all six policies on seeded snapshots");
    add_common(compare, c);
    compare->add_option("--snapshots", snapshots, "Snapshots per seed")->capture_default_str();
    compare->add_option("--mappo", mappo_dir, "MAPPO run directory");
    compare->add_option("--dqn", dqn_dir, "DQN run directory");
    compare->add_flag("--static-only", static_only, "Skip the learned policies");

    std::string ks = "5,10,15,20";
    std::string sweep_policy = "exhaustive";
    auto* sweep = app.add_subcommand("sweep-k", "Mean energy per semantic symbol count k");
    add_common(sweep, c);
    sweep->add_option("--k", ks, "Comma-separated k values")->capture_default_str();
    sweep->add_option("--policy", sweep_policy, "Comma-separated policies")->capture_default_str();
    sweep->add_option("--snapshots", snapshots, "Snapshots per seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto seeds = parse_seeds(c.seeds);
        const fs::path out = c.out;
        if (train->parsed()) {
            std::vector<std::pair<std::string, std::string>> flags;
            if (episodes >= 0) flags.emplace_back("train.episodes", std::to_string(episodes));
            const auto cfg = resolve(c, flags);
            const auto a = algo == "dqn" ? experiment::Algorithm::Dqn : experiment::Algorithm::Mappo;
            std::mutex mu;
            const int every = std::max(1, cfg.train.episodes / 20);
            const auto dirs = experiment::train_runs(cfg, a, seeds, out, c.jobs,
                                                     [&](std::uint64_t seed, const marl::EpisodeMetrics& m) {
                                                         if ((m.episode + 1) % every != 0) return;
                                                         std::lock_guard lock(mu);
                                                         spdlog::info("seed {} episode {}: return {:.3f} entropy {:.3f} energy {:.3e} J",
                                                                      seed, m.episode + 1, m.mean_reward, m.entropy,
                                                                      m.energy_j);
                                                     });
            for (const auto& d : dirs) std::cout << d.string() << '\n';
        } else if (eval->parsed()) {
            const auto cfg = resolve(c);
            const auto policies = parse_policies(policy);
            const auto learned = load_learned(policies, cfg, mappo_dir, dqn_dir);
            write_eval(out, "eval.csv", cfg, experiment::evaluate(cfg, policies, seeds, snapshots, learned, c.jobs));
        } else if (compare->parsed()) {
            const auto cfg = resolve(c);
            const auto policies = static_only ? experiment::static_policies() : experiment::all_policies();
            const auto learned = load_learned(policies, cfg, mappo_dir, dqn_dir);
            write_eval(out, "compare.csv", cfg, experiment::evaluate(cfg, policies, seeds, snapshots, learned, c.jobs));
        } else if (sweep->parsed()) {
            const auto cfg = resolve(c);
            const auto rows = experiment::sweep_k(cfg, parse_ks(ks), parse_policies(sweep_policy), seeds, snapshots, c.jobs);
            std::ostringstream os;
            metrics::write_sweep_csv(os, rows);
            std::istringstream back(os.str());
            metrics::read_sweep_csv(back);
            experiment::write_file(out / "sweep_k.csv", os.str());
            experiment::write_file(out / "config.effective", dump_config(cfg));
            spdlog::info("wrote {} rows to {}", rows.size(), (out / "sweep_k.csv").string());
        }
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const MissingArtifact& e) {
        spdlog::error("{}", e.what());
        return 3;
    } catch (const NumericError& e) {
        spdlog::error("{}", e.what());
        return 4;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
