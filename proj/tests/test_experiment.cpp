#include "semoff/experiment.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace semoff;
using namespace semoff::experiment;
using testing_support::slurp;

namespace {

ScenarioConfig two_ue()
{
    auto c = make_config(Profile::Fast);
    c.train.episodes = 4;
    return c;
}

} // namespace

TEST(Policies, NamesRoundTrip)
{
    for (auto p : all_policies()) EXPECT_EQ(parse_policy(policy_name(p)), p);
    EXPECT_THROW(parse_policy("oracle"), ConfigError);
    EXPECT_EQ(static_policies().size(), 4u);
}

TEST(ParallelFor, CoversEveryIndexAndRethrows)
{
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 4) throw NumericError("boom");
                              }),
                 NumericError);
}

TEST(Evaluate, RowCountAndOrder)
{
    const auto cfg = two_ue();
    const auto rows = evaluate(cfg, static_policies(), {3, 1}, 2, {});
    ASSERT_EQ(rows.size(), 4u * 2u * 2u);
    std::size_t i = 0;
    for (auto p : static_policies())
        for (std::uint64_t s : {3, 1})
            for (int ep = 0; ep < 2; ++ep, ++i) {
                EXPECT_EQ(rows[i].policy, policy_name(p));
                EXPECT_EQ(rows[i].seed, s);
                EXPECT_EQ(rows[i].episode, ep);
            }
}

TEST(Evaluate, StaticOnlySingleSnapshotGivesFourRows)
{
    EXPECT_EQ(evaluate(two_ue(), static_policies(), {1}, 1, {}).size(), 4u);
}

TEST(Evaluate, LearnedPoliciesNeedCheckpoints)
{
    EXPECT_THROW(evaluate(two_ue(), {Policy::Mappo}, {1}, 1, {}), MissingArtifact);
    EXPECT_THROW(evaluate(two_ue(), {Policy::Dqn}, {1}, 1, {}), MissingArtifact);
    LearnedPolicies wrong;
    wrong.mappo = marl::AgentPool::create(make_config(Profile::Paper), 1);
    EXPECT_THROW(evaluate(two_ue(), {Policy::Mappo}, {1}, 1, wrong), ConfigError);
}

TEST(Evaluate, ExhaustiveNeverSpendsMoreThanLocalWhenFeasible)
{
    const auto rows = evaluate(two_ue(), {Policy::Exhaustive, Policy::Local}, {1}, 10, {});
    double ex = 0.0, lc = 0.0;
    for (int ep = 0; ep < 10; ++ep) {
        const auto& e = rows[static_cast<std::size_t>(ep)];
        const auto& l = rows[static_cast<std::size_t>(10 + ep)];
        ASSERT_EQ(e.episode, l.episode);
        ex += e.energy_j;
        lc += l.energy_j;
        if (e.violations == 0 && l.violations == 0 && e.completion_step == l.completion_step) {
            EXPECT_LE(e.energy_j, l.energy_j * (1 + 1e-12));
        }
    }
    EXPECT_LT(ex, lc);
}

TEST(Evaluate, JobsDoNotChangeResults)
{
    const auto cfg = two_ue();
    const auto a = evaluate(cfg, static_policies(), {1, 2}, 5, {}, 1);
    const auto b = evaluate(cfg, static_policies(), {1, 2}, 5, {}, 4);
    EXPECT_EQ(a, b);
}

TEST(Summarize, MeanStdAndCompletion)
{
    std::vector<metrics::EvalRow> rows{{"local", 1, 0, 1.0, 5, 0}, {"local", 1, 1, 3.0, -1, 2},
                                       {"remote", 1, 0, 2.0, 4, 0}};
    const auto s = summarize(10, rows);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].policy, "local");
    EXPECT_EQ(s[0].mean_energy_j, 2.0);
    EXPECT_NEAR(s[0].std_energy_j, std::sqrt(2.0), 1e-15);
    EXPECT_EQ(s[0].completion_rate, 0.5);
    EXPECT_EQ(s[1].std_energy_j, 0.0);
    EXPECT_EQ(s[1].k, 10);
}

TEST(SweepK, OneRowPerKAndPolicy)
{
    const auto rows = sweep_k(two_ue(), {10}, {Policy::Exhaustive}, {1}, 2);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].k, 10);
    const auto two = sweep_k(two_ue(), {5, 20}, {Policy::Local, Policy::Remote}, {1}, 2);
    ASSERT_EQ(two.size(), 4u);
    EXPECT_EQ(two[2].k, 20);
    EXPECT_EQ(two[3].policy, "remote");
}

TEST(SweepK, RejectsUnknownKAndLearnedPolicies)
{
    EXPECT_THROW(sweep_k(two_ue(), {7}, {Policy::Exhaustive}, {1}, 1), ConfigError);
    EXPECT_THROW(sweep_k(two_ue(), {}, {Policy::Exhaustive}, {1}, 1), ConfigError);
    EXPECT_THROW(sweep_k(two_ue(), {10}, {Policy::Mappo}, {1}, 1), ConfigError);
}

TEST(TrainRuns, WritesArtifactsAndIsReproducible)
{
    const auto cfg = two_ue();
    for (auto algo : {Algorithm::Mappo, Algorithm::Dqn}) {
        const auto out_a = testing_support::scratch_dir("runs_a"), out_b = testing_support::scratch_dir("runs_b");
        const auto dirs = train_runs(cfg, algo, {1, 2}, out_a, 2);
        train_runs(cfg, algo, {1, 2}, out_b, 1);
        ASSERT_EQ(dirs.size(), 2u);
        EXPECT_EQ(dirs[1], run_dir_for(out_a, algo, 2));
        for (std::uint64_t s : {1, 2}) {
            const auto da = run_dir_for(out_a, algo, s), db = run_dir_for(out_b, algo, s);
            const auto rows = metrics::read_training((da / "metrics.jsonl").string());
            EXPECT_EQ(rows.size(), 4u);
            EXPECT_TRUE(std::filesystem::exists(da / "config.effective"));
            EXPECT_NE(slurp(da / "config.effective").find("train.seed=" + std::to_string(s)), std::string::npos);
            EXPECT_EQ(slurp(da / "metrics.jsonl"), slurp(db / "metrics.jsonl"));
            EXPECT_EQ(slurp(marl::checkpoint_path(da, 1, 4)), slurp(marl::checkpoint_path(db, 1, 4)));
        }
        const auto seed1 = slurp(run_dir_for(out_a, algo, 1) / "metrics.jsonl");
        EXPECT_NE(seed1, slurp(run_dir_for(out_a, algo, 2) / "metrics.jsonl"));
    }
}

TEST(TrainRuns, TrainedPoliciesEvaluate)
{
    const auto cfg = two_ue();
    const auto out = testing_support::scratch_dir("runs_eval");
    train_runs(cfg, Algorithm::Mappo, {1}, out);
    train_runs(cfg, Algorithm::Dqn, {1}, out);
    LearnedPolicies learned;
    learned.mappo = marl::load_pool(run_dir_for(out, Algorithm::Mappo, 1), 2);
    learned.dqn = baselines::load_dqn_pool(run_dir_for(out, Algorithm::Dqn, 1), 2, cfg.dqn);
    const auto rows = evaluate(cfg, all_policies(), {1}, 3, learned, 3);
    EXPECT_EQ(rows.size(), 18u);
    EXPECT_EQ(rows, evaluate(cfg, all_policies(), {1}, 3, learned, 1));
}
