#ifndef SEMOFF_METRICS_HPP
#define SEMOFF_METRICS_HPP

#include "semoff/errors.hpp"
#include "semoff/marl.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace semoff::metrics {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- training curve (JSON lines) ----------------------------------------------

inline const std::vector<std::string>& training_fields()
{
    static const std::vector<std::string> f{"episode",      "mean_reward", "actor_loss", "critic_loss",
                                            "entropy",      "clip_fraction", "energy_J", "completion_step",
                                            "steps"};
    return f;
}

inline std::string to_json_line(const marl::EpisodeMetrics& m)
{
    nlohmann::ordered_json j;
    j["episode"] = m.episode;
    j["mean_reward"] = m.mean_reward;
    j["actor_loss"] = m.actor_loss;
    j["critic_loss"] = m.critic_loss;
    j["entropy"] = m.entropy;
    j["clip_fraction"] = m.clip_fraction;
    j["energy_J"] = m.energy_j;
    j["completion_step"] = m.completion_step;
    j["steps"] = m.steps;
    return j.dump();
}

inline marl::EpisodeMetrics from_json_line(const std::string& line)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("metrics row is not JSON: ") + e.what());
    }
    if (!j.is_object() || j.size() != training_fields().size()) throw SchemaError("metrics row has wrong field count");
    for (const auto& f : training_fields())
        if (!j.contains(f) || !j[f].is_number()) throw SchemaError("metrics row lacks numeric field '" + f + "'");
    for (const char* f : {"episode", "completion_step", "steps"})
        if (!j[f].is_number_integer()) throw SchemaError(std::string("metrics field '") + f + "' must be an integer");
    marl::EpisodeMetrics m;
    m.episode = j["episode"].get<int>();
    m.mean_reward = j["mean_reward"].get<double>();
    m.actor_loss = j["actor_loss"].get<double>();
    m.critic_loss = j["critic_loss"].get<double>();
    m.entropy = j["entropy"].get<double>();
    m.clip_fraction = j["clip_fraction"].get<double>();
    m.energy_j = j["energy_J"].get<double>();
    m.completion_step = j["completion_step"].get<int>();
    m.steps = j["steps"].get<int>();
    return m;
}

inline std::vector<marl::EpisodeMetrics> read_training(std::istream& in)
{
    std::vector<marl::EpisodeMetrics> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(from_json_line(line));
    return rows;
}

inline std::vector<marl::EpisodeMetrics> read_training(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open metrics file '" + path + "'");
    return read_training(in);
}

// --- evaluation / sweep tables (CSV) ------------------------------------------

struct EvalRow {
    std::string policy;
    std::uint64_t seed = 0;
    int episode = 0;
    double energy_j = 0.0;
    int completion_step = -1; // -1: queues not emptied within the horizon
    int violations = 0;

    bool operator==(const EvalRow&) const = default;
};

struct SweepRow {
    int k = 0;
    std::string policy;
    double mean_energy_j = 0.0;
    double std_energy_j = 0.0;
    double completion_rate = 0.0;

    bool operator==(const SweepRow&) const = default;
};

inline constexpr const char* kEvalHeader = "policy,seed,episode,energy_J,completion_step,violations";
inline constexpr const char* kSweepHeader = "k,policy,mean_energy_J,std_energy_J,completion_rate";

/// Round-trip formatting, independent of the stream's locale and precision.
inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double to_double(const std::string& s, const char* field)
{
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && end == s.data() + s.size() && !s.empty()) return v;
    throw SchemaError(std::string("field '") + field + "': not a number: '" + s + "'");
}

inline long long to_int(const std::string& s, const char* field)
{
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw SchemaError(std::string("field '") + field + "': not an integer: '" + s + "'");
}

inline void check_policy(const std::string& p)
{
    if (p.empty() || p.find_first_of(",\"\n") != std::string::npos)
        throw SchemaError("policy name '" + p + "' is not a valid CSV cell");
}

} // namespace detail

inline void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows)
{
    out << kEvalHeader << '\n';
    for (const auto& r : rows) {
        detail::check_policy(r.policy);
        out << r.policy << ',' << r.seed << ',' << r.episode << ',' << num(r.energy_j) << ',' << r.completion_step
            << ',' << r.violations << '\n';
    }
}

inline std::vector<EvalRow> read_eval_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kEvalHeader) throw SchemaError("eval CSV: unexpected header");
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 6) throw SchemaError("eval CSV: expected 6 columns in '" + line + "'");
        EvalRow r;
        r.policy = c[0];
        detail::check_policy(r.policy);
        r.seed = static_cast<std::uint64_t>(detail::to_int(c[1], "seed"));
        r.episode = static_cast<int>(detail::to_int(c[2], "episode"));
        r.energy_j = detail::to_double(c[3], "energy_J");
        r.completion_step = static_cast<int>(detail::to_int(c[4], "completion_step"));
        r.violations = static_cast<int>(detail::to_int(c[5], "violations"));
        if (r.energy_j < 0 || r.violations < 0 || r.completion_step < -1) throw SchemaError("eval CSV: value out of range");
        rows.push_back(r);
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows)
{
    out << kSweepHeader << '\n';
    for (const auto& r : rows) {
        detail::check_policy(r.policy);
        out << r.k << ',' << r.policy << ',' << num(r.mean_energy_j) << ',' << num(r.std_energy_j) << ','
            << num(r.completion_rate) << '\n';
    }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kSweepHeader) throw SchemaError("sweep CSV: unexpected header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 5) throw SchemaError("sweep CSV: expected 5 columns in '" + line + "'");
        SweepRow r;
        r.k = static_cast<int>(detail::to_int(c[0], "k"));
        r.policy = c[1];
        detail::check_policy(r.policy);
        r.mean_energy_j = detail::to_double(c[2], "mean_energy_J");
        r.std_energy_j = detail::to_double(c[3], "std_energy_J");
        r.completion_rate = detail::to_double(c[4], "completion_rate");
        if (r.completion_rate < 0 || r.completion_rate > 1 || r.std_energy_j < 0)
            throw SchemaError("sweep CSV: value out of range");
        rows.push_back(r);
    }
    return rows;
}

} // namespace semoff::metrics

#endif // SEMOFF_METRICS_HPP
