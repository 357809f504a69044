#ifndef SEMOFF_CONFIG_HPP
#define SEMOFF_CONFIG_HPP

#include "semoff/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace semoff {

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

struct ChannelConfig {
    double carrier_hz = 6e9;
    double subband_bw_hz = 1e5;
    double noise_psd_w_hz = std::pow(10.0, -174.0 / 10.0 - 3.0);
    double pl0_db = 46.0;
    double d0_m = 1.0;
    double pathloss_exp = 3.0;
    double d_min_m = 1.0;
};

struct SemanticConfig {
    int k = 15;
    double avg_semantic_units = 30.0; // A^s
    double avg_words = 20.0;          // A^w
    std::string table_path;           // empty: built-in table
};

struct EnvConfig {
    int num_ues = 4;
    double area_m = 500.0;
    int queue_len = 10;
    int max_steps = 40;
    double flops_per_sentence = 2.2e10;
    double decode_cost_ratio = 2.0;
    double max_latency_s = 0.05;
    double battery_j = 1.0;
    double p_min_w = dbm_to_watt(15.0);
    double p_max_w = dbm_to_watt(24.0);
    double local_flops_per_cycle = 1024.0;
    double f_min_hz = 0.96e9;
    double f_max_hz = 1.72e9;
    double f_idle_hz = 0.0;
    double remote_flops_per_cycle = 8192.0;
    double remote_freq_hz = 0.96e9;
    double alpha = 1e-28;
    double beta = 1e-28;
    double download_latency_s = 1e-4;
    double xi_step = 1.0;
    double xi_terminal = 1.0;
    double eps_min = 0.7;
    /// Multiplier applied to joules inside the reward only (1000 = millijoules).
    double reward_energy_scale = 1.0;

    /// FLOPs charged per sentence on either side of the link.
    double effective_flops() const { return flops_per_sentence * decode_cost_ratio; }
};

struct NetConfig {
    std::vector<std::size_t> hidden{64, 64};
    double actor_output_gain = 0.01;
};

struct PpoConfig {
    double lr = 5e-7;
    double gamma = 0.95;
    double lambda = 0.95;
    double clip = 0.2;
    int epochs = 4;
    int minibatch = 256;
    double c1 = 0.5;
    double c2 = 0.0;
    bool normalize_advantages = true;
};

struct MarlConfig {
    int fed_period = 100;
    bool average_critic = true;
    bool reset_optimizer = false;
};

struct DqnConfig {
    double lr = 5e-7;
    double gamma = 0.95;
    int buffer = 10000;
    int batch = 32;
    int target_sync = 200;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay_fraction = 0.6;
};

struct GridConfig {
    int power_levels = 4;
    int freq_levels = 4;
};

struct TrainConfig {
    int episodes = 3000;
    std::uint64_t seed = 1;
};

struct ScenarioConfig {
    ChannelConfig channel;
    SemanticConfig semantics;
    EnvConfig env;
    NetConfig net;
    PpoConfig ppo;
    MarlConfig marl;
    DqnConfig dqn;
    GridConfig grid;
    TrainConfig train;
    double exhaustive_max_combinations = 1e6;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

struct KeyBinding {
    std::function<void(ScenarioConfig&, const std::string&)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

/// Shortest text that parses back to the same double.
inline std::string fmt_double(double d)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, r.ptr);
}

inline std::map<std::string, KeyBinding>& registry()
{
    static std::map<std::string, KeyBinding> keys = [] {
        std::map<std::string, KeyBinding> m;
        auto dbl = [&m](const std::string& key, auto member) {
            m[key] = {[key, member](ScenarioConfig& c, const std::string& v) { member(c) = parse_double(key, v); },
                      [member](const ScenarioConfig& c) {
                          return fmt_double(member(const_cast<ScenarioConfig&>(c)));
                      }};
        };
        auto integer = [&m](const std::string& key, auto member) {
            m[key] = {[key, member](ScenarioConfig& c, const std::string& v) {
                          member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_int(key, v));
                      },
                      [member](const ScenarioConfig& c) {
                          return std::to_string(member(const_cast<ScenarioConfig&>(c)));
                      }};
        };
        auto boolean = [&m](const std::string& key, auto member) {
            m[key] = {[key, member](ScenarioConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
                      [member](const ScenarioConfig& c) {
                          return std::string(member(const_cast<ScenarioConfig&>(c)) ? "true" : "false");
                      }};
        };
        // dBm-valued keys are converted to watts here and nowhere else.
        auto dbm = [&m](const std::string& key, auto member) {
            m[key] = {[key, member](ScenarioConfig& c, const std::string& v) {
                          member(c) = dbm_to_watt(parse_double(key, v));
                      },
                      [member](const ScenarioConfig& c) {
                          return fmt_double(watt_to_dbm(member(const_cast<ScenarioConfig&>(c))));
                      }};
        };

        dbl("channel.carrier_hz", [](ScenarioConfig& c) -> double& { return c.channel.carrier_hz; });
        dbl("channel.subband_bw_hz", [](ScenarioConfig& c) -> double& { return c.channel.subband_bw_hz; });
        m["channel.noise_psd_dbm_hz"] = {
            [](ScenarioConfig& c, const std::string& v) {
                c.channel.noise_psd_w_hz = std::pow(10.0, parse_double("channel.noise_psd_dbm_hz", v) / 10.0 - 3.0);
            },
            [](const ScenarioConfig& c) { return fmt_double(10.0 * std::log10(c.channel.noise_psd_w_hz) + 30.0); }};
        dbl("channel.pl0_db", [](ScenarioConfig& c) -> double& { return c.channel.pl0_db; });
        dbl("channel.d0_m", [](ScenarioConfig& c) -> double& { return c.channel.d0_m; });
        dbl("channel.pathloss_exp", [](ScenarioConfig& c) -> double& { return c.channel.pathloss_exp; });
        dbl("channel.d_min_m", [](ScenarioConfig& c) -> double& { return c.channel.d_min_m; });

        integer("semantics.k", [](ScenarioConfig& c) -> int& { return c.semantics.k; });
        dbl("semantics.avg_semantic_units", [](ScenarioConfig& c) -> double& { return c.semantics.avg_semantic_units; });
        dbl("semantics.avg_words", [](ScenarioConfig& c) -> double& { return c.semantics.avg_words; });
        m["semantics.table_path"] = {[](ScenarioConfig& c, const std::string& v) { c.semantics.table_path = v; },
                                     [](const ScenarioConfig& c) { return c.semantics.table_path; }};

        integer("env.num_ues", [](ScenarioConfig& c) -> int& { return c.env.num_ues; });
        dbl("env.area_m", [](ScenarioConfig& c) -> double& { return c.env.area_m; });
        integer("env.queue_len", [](ScenarioConfig& c) -> int& { return c.env.queue_len; });
        integer("env.max_steps", [](ScenarioConfig& c) -> int& { return c.env.max_steps; });
        dbl("env.flops_per_sentence", [](ScenarioConfig& c) -> double& { return c.env.flops_per_sentence; });
        dbl("env.decode_cost_ratio", [](ScenarioConfig& c) -> double& { return c.env.decode_cost_ratio; });
        dbl("env.max_latency_s", [](ScenarioConfig& c) -> double& { return c.env.max_latency_s; });
        dbl("env.battery_j", [](ScenarioConfig& c) -> double& { return c.env.battery_j; });
        dbm("env.p_min_dbm", [](ScenarioConfig& c) -> double& { return c.env.p_min_w; });
        dbm("env.p_max_dbm", [](ScenarioConfig& c) -> double& { return c.env.p_max_w; });
        dbl("env.local_flops_per_cycle", [](ScenarioConfig& c) -> double& { return c.env.local_flops_per_cycle; });
        dbl("env.f_min_hz", [](ScenarioConfig& c) -> double& { return c.env.f_min_hz; });
        dbl("env.f_max_hz", [](ScenarioConfig& c) -> double& { return c.env.f_max_hz; });
        dbl("env.f_idle_hz", [](ScenarioConfig& c) -> double& { return c.env.f_idle_hz; });
        dbl("env.remote_flops_per_cycle", [](ScenarioConfig& c) -> double& { return c.env.remote_flops_per_cycle; });
        dbl("env.remote_freq_hz", [](ScenarioConfig& c) -> double& { return c.env.remote_freq_hz; });
        dbl("env.alpha", [](ScenarioConfig& c) -> double& { return c.env.alpha; });
        dbl("env.beta", [](ScenarioConfig& c) -> double& { return c.env.beta; });
        dbl("env.download_latency_s", [](ScenarioConfig& c) -> double& { return c.env.download_latency_s; });
        dbl("env.xi_step", [](ScenarioConfig& c) -> double& { return c.env.xi_step; });
        dbl("env.xi_terminal", [](ScenarioConfig& c) -> double& { return c.env.xi_terminal; });
        dbl("env.eps_min", [](ScenarioConfig& c) -> double& { return c.env.eps_min; });
        dbl("env.reward_energy_scale", [](ScenarioConfig& c) -> double& { return c.env.reward_energy_scale; });

        m["nnet.hidden"] = {[](ScenarioConfig& c, const std::string& v) {
                                c.net.hidden.clear();
                                std::stringstream ss(v);
                                std::string item;
                                while (std::getline(ss, item, ',')) {
                                    auto n = parse_int("nnet.hidden", trim(item));
                                    if (n <= 0) throw ConfigError("config key 'nnet.hidden': widths must be positive");
                                    c.net.hidden.push_back(static_cast<std::size_t>(n));
                                }
                            },
                            [](const ScenarioConfig& c) {
                                std::string s;
                                for (std::size_t i = 0; i < c.net.hidden.size(); ++i)
                                    s += (i ? "," : "") + std::to_string(c.net.hidden[i]);
                                return s;
                            }};
        dbl("nnet.actor_output_gain", [](ScenarioConfig& c) -> double& { return c.net.actor_output_gain; });

        dbl("ppo.lr", [](ScenarioConfig& c) -> double& { return c.ppo.lr; });
        dbl("ppo.gamma", [](ScenarioConfig& c) -> double& { return c.ppo.gamma; });
        dbl("ppo.lambda", [](ScenarioConfig& c) -> double& { return c.ppo.lambda; });
        dbl("ppo.clip", [](ScenarioConfig& c) -> double& { return c.ppo.clip; });
        integer("ppo.epochs", [](ScenarioConfig& c) -> int& { return c.ppo.epochs; });
        integer("ppo.minibatch", [](ScenarioConfig& c) -> int& { return c.ppo.minibatch; });
        dbl("ppo.c1", [](ScenarioConfig& c) -> double& { return c.ppo.c1; });
        dbl("ppo.c2", [](ScenarioConfig& c) -> double& { return c.ppo.c2; });
        boolean("ppo.normalize_advantages", [](ScenarioConfig& c) -> bool& { return c.ppo.normalize_advantages; });

        integer("marl.fed_period", [](ScenarioConfig& c) -> int& { return c.marl.fed_period; });
        boolean("marl.average_critic", [](ScenarioConfig& c) -> bool& { return c.marl.average_critic; });
        boolean("marl.reset_optimizer", [](ScenarioConfig& c) -> bool& { return c.marl.reset_optimizer; });

        dbl("dqn.lr", [](ScenarioConfig& c) -> double& { return c.dqn.lr; });
        dbl("dqn.gamma", [](ScenarioConfig& c) -> double& { return c.dqn.gamma; });
        integer("dqn.buffer", [](ScenarioConfig& c) -> int& { return c.dqn.buffer; });
        integer("dqn.batch", [](ScenarioConfig& c) -> int& { return c.dqn.batch; });
        integer("dqn.target_sync", [](ScenarioConfig& c) -> int& { return c.dqn.target_sync; });
        dbl("dqn.eps_start", [](ScenarioConfig& c) -> double& { return c.dqn.eps_start; });
        dbl("dqn.eps_end", [](ScenarioConfig& c) -> double& { return c.dqn.eps_end; });
        dbl("dqn.eps_decay_fraction", [](ScenarioConfig& c) -> double& { return c.dqn.eps_decay_fraction; });

        integer("grid.power_levels", [](ScenarioConfig& c) -> int& { return c.grid.power_levels; });
        integer("grid.freq_levels", [](ScenarioConfig& c) -> int& { return c.grid.freq_levels; });

        integer("train.episodes", [](ScenarioConfig& c) -> int& { return c.train.episodes; });
        integer("train.seed", [](ScenarioConfig& c) -> std::uint64_t& { return c.train.seed; });

        dbl("exhaustive.max_combinations", [](ScenarioConfig& c) -> double& { return c.exhaustive_max_combinations; });
        return m;
    }();
    return keys;
}

} // namespace detail

inline std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& [k, _] : detail::registry()) out.push_back(k);
    return out;
}

/// Sets one flat key. Unknown keys and malformed values throw ConfigError naming the key.
inline void set_config_value(ScenarioConfig& cfg, const std::string& key, const std::string& value)
{
    auto& reg = detail::registry();
    auto it = reg.find(key);
    if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

inline std::string get_config_value(const ScenarioConfig& cfg, const std::string& key)
{
    auto& reg = detail::registry();
    auto it = reg.find(key);
    if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get(cfg);
}

/// Parses `key=value` lines; `#` starts a comment. Returns the pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& origin)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        out.emplace_back(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    return out;
}

/// Checks cross-field consistency. Throws ConfigError naming the offending key.
inline void validate(const ScenarioConfig& c)
{
    auto require = [](bool ok, const char* key, const char* what) {
        if (!ok) throw ConfigError(std::string("config key '") + key + "': " + what);
    };
    require(c.channel.carrier_hz > 0, "channel.carrier_hz", "must be positive");
    require(c.channel.subband_bw_hz > 0, "channel.subband_bw_hz", "must be positive");
    require(c.channel.noise_psd_w_hz > 0, "channel.noise_psd_dbm_hz", "must be finite");
    require(c.channel.pathloss_exp > 0, "channel.pathloss_exp", "must be positive");
    require(c.channel.d0_m > 0, "channel.d0_m", "must be positive");
    require(c.channel.d_min_m > 0, "channel.d_min_m", "must be positive");
    require(c.semantics.k > 0, "semantics.k", "must be positive");
    require(c.semantics.avg_semantic_units > 0, "semantics.avg_semantic_units", "must be positive");
    require(c.semantics.avg_words > 0, "semantics.avg_words", "must be positive");
    require(c.env.num_ues >= 1, "env.num_ues", "must be at least 1");
    require(c.env.area_m > 0, "env.area_m", "must be positive");
    require(c.env.queue_len >= 0, "env.queue_len", "must be non-negative");
    require(c.env.max_steps >= 1, "env.max_steps", "must be at least 1");
    require(c.env.flops_per_sentence > 0, "env.flops_per_sentence", "must be positive");
    require(c.env.decode_cost_ratio > 0, "env.decode_cost_ratio", "must be positive");
    require(c.env.max_latency_s > 0, "env.max_latency_s", "must be positive");
    require(c.env.battery_j > 0, "env.battery_j", "must be positive");
    require(c.env.p_min_w <= c.env.p_max_w, "env.p_min_dbm", "must not exceed env.p_max_dbm");
    require(c.env.f_min_hz > 0 && c.env.f_min_hz <= c.env.f_max_hz, "env.f_min_hz", "must be in (0, env.f_max_hz]");
    require(c.env.f_idle_hz >= 0, "env.f_idle_hz", "must be non-negative");
    require(c.env.local_flops_per_cycle > 0, "env.local_flops_per_cycle", "must be positive");
    require(c.env.remote_flops_per_cycle > 0, "env.remote_flops_per_cycle", "must be positive");
    require(c.env.remote_freq_hz > 0, "env.remote_freq_hz", "must be positive");
    require(c.env.alpha >= 0, "env.alpha", "must be non-negative");
    require(c.env.beta >= 0, "env.beta", "must be non-negative");
    require(c.env.download_latency_s >= 0, "env.download_latency_s", "must be non-negative");
    require(c.env.eps_min >= 0 && c.env.eps_min <= 1, "env.eps_min", "must be in [0,1]");
    require(c.env.reward_energy_scale > 0, "env.reward_energy_scale", "must be positive");
    require(!c.net.hidden.empty(), "nnet.hidden", "needs at least one hidden layer");
    require(c.ppo.lr > 0, "ppo.lr", "must be positive");
    require(c.ppo.gamma > 0 && c.ppo.gamma < 1, "ppo.gamma", "must be in (0,1)");
    require(c.ppo.lambda > 0 && c.ppo.lambda <= 1, "ppo.lambda", "must be in (0,1]");
    require(c.ppo.clip > 0, "ppo.clip", "must be positive");
    require(c.ppo.epochs >= 1, "ppo.epochs", "must be at least 1");
    require(c.ppo.minibatch >= 1, "ppo.minibatch", "must be at least 1");
    require(c.marl.fed_period >= 1, "marl.fed_period", "must be at least 1");
    require(c.dqn.lr > 0, "dqn.lr", "must be positive");
    require(c.dqn.gamma > 0 && c.dqn.gamma < 1, "dqn.gamma", "must be in (0,1)");
    require(c.dqn.buffer >= 1, "dqn.buffer", "must be at least 1");
    require(c.dqn.batch >= 1, "dqn.batch", "must be at least 1");
    require(c.dqn.target_sync >= 1, "dqn.target_sync", "must be at least 1");
    require(c.grid.power_levels >= 1, "grid.power_levels", "must be at least 1");
    require(c.grid.freq_levels >= 1, "grid.freq_levels", "must be at least 1");
    require(c.train.episodes >= 0, "train.episodes", "must be non-negative");
}

enum class Profile { Paper, Fast };

inline Profile parse_profile(const std::string& s)
{
    if (s == "paper") return Profile::Paper;
    if (s == "fast") return Profile::Fast;
    throw ConfigError("unknown profile '" + s + "' (expected paper|fast)");
}

/// Built-in defaults with the profile bundle applied on top.
///
/// paper: learning rate 5e-7, energy in joules inside the reward.
/// fast:  two UEs, learning rate 3e-4, 300 episodes, reward energy in millijoules
///        so the energy term is visible next to the unit step bonus.
inline ScenarioConfig make_config(Profile profile)
{
    ScenarioConfig c;
    if (profile == Profile::Fast) {
        c.env.num_ues = 2;
        c.ppo.lr = 3e-4;
        c.dqn.lr = 3e-4;
        c.train.episodes = 300;
        c.env.reward_energy_scale = 1000.0;
    }
    return c;
}

/// Applies a config file on top of `cfg`. Missing file is a ConfigError that names the path.
inline void apply_config_file(ScenarioConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    for (const auto& [k, v] : parse_key_values(in, path)) set_config_value(cfg, k, v);
}

/// Effective configuration as sorted `key=value` lines.
inline std::string dump_config(const ScenarioConfig& cfg)
{
    std::string out;
    for (const auto& [k, b] : detail::registry()) out += k + "=" + b.get(cfg) + "\n";
    return out;
}

} // namespace semoff

#endif // SEMOFF_CONFIG_HPP
