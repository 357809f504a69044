#include "semoff/metrics.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <sstream>

using namespace semoff;
using namespace semoff::metrics;

namespace {

marl::EpisodeMetrics sample_row(int ep)
{
    marl::EpisodeMetrics m;
    m.episode = ep;
    m.mean_reward = -12.345678901234567;
    m.actor_loss = 1e-300;
    m.critic_loss = 0.1 + 0.2;
    m.entropy = 2.5;
    m.clip_fraction = 0.0625;
    m.energy_j = 0.0123;
    m.completion_step = ep % 2 ? -1 : 17;
    m.steps = 40;
    return m;
}

} // namespace

TEST(TrainingJsonl, RoundTripIsExact)
{
    std::stringstream ss;
    for (int ep = 0; ep < 3; ++ep) ss << to_json_line(sample_row(ep)) << '\n';
    const auto rows = read_training(ss);
    ASSERT_EQ(rows.size(), 3u);
    for (int ep = 0; ep < 3; ++ep) {
        const auto want = sample_row(ep);
        EXPECT_EQ(rows[ep].episode, ep);
        EXPECT_EQ(rows[ep].mean_reward, want.mean_reward);
        EXPECT_EQ(rows[ep].actor_loss, want.actor_loss);
        EXPECT_EQ(rows[ep].critic_loss, want.critic_loss);
        EXPECT_EQ(rows[ep].energy_j, want.energy_j);
        EXPECT_EQ(rows[ep].completion_step, want.completion_step);
        EXPECT_EQ(rows[ep].steps, 40);
    }
}

TEST(TrainingJsonl, FieldOrderIsFixed)
{
    const auto line = to_json_line(sample_row(0));
    std::size_t pos = 0;
    for (const auto& f : training_fields()) {
        const auto at = line.find("\"" + f + "\"", pos);
        ASSERT_NE(at, std::string::npos) << f;
        pos = at;
    }
}

TEST(TrainingJsonl, SchemaViolations)
{
    EXPECT_THROW(from_json_line("not json"), SchemaError);
    EXPECT_THROW(from_json_line("[1,2]"), SchemaError);
    auto line = to_json_line(sample_row(0));
    EXPECT_THROW(from_json_line(line.substr(0, line.size() - 1) + ",\"extra\":1}"), SchemaError);
    auto no_steps = line;
    no_steps.replace(no_steps.find("\"steps\""), 7, "\"stepz\"");
    EXPECT_THROW(from_json_line(no_steps), SchemaError);
    auto text_field = line;
    text_field.replace(text_field.find("2.5"), 3, "\"x\"");
    EXPECT_THROW(from_json_line(text_field), SchemaError);
    auto float_episode = line;
    float_episode.replace(float_episode.find("\"episode\":0"), 11, "\"episode\":0.5");
    EXPECT_THROW(from_json_line(float_episode), SchemaError);
    EXPECT_THROW(read_training("/nonexistent/metrics.jsonl"), MissingArtifact);
}

TEST(EvalCsv, RoundTripIsExact)
{
    std::vector<EvalRow> rows{{"exhaustive", 1, 0, 0.1 + 0.2, 12, 0},
                              {"random", 18446744073709551ull, 99, 1.0 / 3.0, -1, 7}};
    std::stringstream ss;
    write_eval_csv(ss, rows);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kEvalHeader);
    EXPECT_EQ(read_eval_csv(ss), rows);
}

TEST(EvalCsv, SchemaViolations)
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return read_eval_csv(in);
    };
    const std::string h = std::string(kEvalHeader) + "\n";
    EXPECT_THROW(parse("policy,seed\n"), SchemaError);
    EXPECT_THROW(parse(h + "local,1,0,0.5,3\n"), SchemaError);
    EXPECT_THROW(parse(h + "local,1,0,abc,3,0\n"), SchemaError);
    EXPECT_THROW(parse(h + "local,1,0,0.5,3.5,0\n"), SchemaError);
    EXPECT_THROW(parse(h + "local,1,0,-0.5,3,0\n"), SchemaError);
    EXPECT_THROW(parse(h + ",1,0,0.5,3,0\n"), SchemaError);
    EXPECT_EQ(parse(h).size(), 0u);
    std::ostringstream out;
    EXPECT_THROW(write_eval_csv(out, {{"a,b", 1, 0, 0.0, 0, 0}}), SchemaError);
}

TEST(SweepCsv, RoundTripAndRanges)
{
    std::vector<SweepRow> rows{{5, "exhaustive", 0.01, 0.002, 1.0}, {20, "local", 0.5, 0.0, 0.25}};
    std::stringstream ss;
    write_sweep_csv(ss, rows);
    EXPECT_EQ(read_sweep_csv(ss), rows);
    std::istringstream bad(std::string(kSweepHeader) + "\n5,local,0.1,0.0,1.5\n");
    EXPECT_THROW(read_sweep_csv(bad), SchemaError);
}

TEST(Num, RoundTripsEveryDouble)
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()})
        EXPECT_EQ(std::strtod(num(v).c_str(), nullptr), v);
    std::istringstream tiny(std::string(kEvalHeader) + "\nlocal,1,0," + num(std::numeric_limits<double>::denorm_min()) +
                            ",3,0\n");
    EXPECT_EQ(read_eval_csv(tiny)[0].energy_j, std::numeric_limits<double>::denorm_min());
}
