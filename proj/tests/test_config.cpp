#include "semoff/config.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace semoff;
using testing_support::rel_err;

TEST(Config, DefaultsFollowTheScenarioTable)
{
    const ScenarioConfig c;
    EXPECT_EQ(c.env.num_ues, 4);
    EXPECT_EQ(c.env.queue_len, 10);
    EXPECT_EQ(c.env.max_latency_s, 0.05);
    EXPECT_EQ(c.semantics.k, 15);
    EXPECT_EQ(c.ppo.lr, 5e-7);
    EXPECT_EQ(c.ppo.gamma, 0.95);
    EXPECT_EQ(c.ppo.minibatch, 256);
    EXPECT_EQ(c.marl.fed_period, 100);
    EXPECT_EQ(c.env.remote_flops_per_cycle, 8192.0);
    EXPECT_EQ(c.env.remote_freq_hz, 0.96e9);
    EXPECT_EQ(c.dqn.buffer, 10000);
    EXPECT_EQ(c.dqn.target_sync, 200);
    // 24 dBm = 10^(-0.6) W
    EXPECT_LT(rel_err(c.env.p_max_w, 0.25118864315095796), 1e-15);
    EXPECT_LT(rel_err(c.channel.noise_psd_w_hz, 3.981071705534969e-21), 1e-14);
}

TEST(Config, DbmConversionsInvert)
{
    for (double dbm : {-174.0, 0.0, 15.0, 24.0, 30.0}) EXPECT_NEAR(watt_to_dbm(dbm_to_watt(dbm)), dbm, 1e-12);
    EXPECT_DOUBLE_EQ(dbm_to_watt(30.0), 1.0);
}

TEST(Config, UnknownKeyNamesTheKey)
{
    ScenarioConfig c;
    try {
        set_config_value(c, "env.nonsense", "1");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("env.nonsense"), std::string::npos);
    }
}

TEST(Config, BadValueNamesTheKey)
{
    ScenarioConfig c;
    try {
        set_config_value(c, "env.num_ues", "four");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("env.num_ues"), std::string::npos);
    }
    EXPECT_THROW(set_config_value(c, "ppo.normalize_advantages", "maybe"), ConfigError);
}

TEST(Config, PowerKeysAreInDbm)
{
    ScenarioConfig c;
    set_config_value(c, "env.p_max_dbm", "30");
    EXPECT_DOUBLE_EQ(c.env.p_max_w, 1.0);
    set_config_value(c, "channel.noise_psd_dbm_hz", "-174");
    EXPECT_LT(rel_err(c.channel.noise_psd_w_hz, ScenarioConfig{}.channel.noise_psd_w_hz), 1e-14);
}

TEST(Config, HiddenLayerList)
{
    ScenarioConfig c;
    set_config_value(c, "nnet.hidden", "32, 16,8");
    EXPECT_EQ(c.net.hidden, (std::vector<std::size_t>{32, 16, 8}));
    EXPECT_EQ(get_config_value(c, "nnet.hidden"), "32,16,8");
}

TEST(Config, EveryKeyRoundTripsThroughItsString)
{
    auto c = make_config(Profile::Fast);
    for (const auto& key : config_keys()) {
        const auto v = get_config_value(c, key);
        auto d = c;
        set_config_value(d, key, v);
        EXPECT_EQ(get_config_value(d, key), v) << key;
    }
}

TEST(Config, DumpReparseIsStable)
{
    const auto c = make_config(Profile::Paper);
    const auto text = dump_config(c);
    std::istringstream in(text);
    ScenarioConfig d;
    d.env.num_ues = 9;
    for (const auto& [k, v] : parse_key_values(in, "dump")) set_config_value(d, k, v);
    EXPECT_EQ(dump_config(d), text);
    // sorted key order
    std::istringstream lines(text);
    std::string prev, line;
    while (std::getline(lines, line)) {
        EXPECT_LT(prev, line);
        prev = line;
    }
}

TEST(Config, KeyValueParsingSkipsCommentsAndBlanks)
{
    std::istringstream in("# scenario\n\n env.num_ues = 2  # two UEs\nppo.lr=1e-3\n");
    const auto kv = parse_key_values(in, "x");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0].first, "env.num_ues");
    EXPECT_EQ(kv[0].second, "2");
    std::istringstream bad("env.num_ues\n");
    EXPECT_THROW(parse_key_values(bad, "x"), ConfigError);
}

TEST(Config, MissingFileMessageContainsPath)
{
    ScenarioConfig c;
    try {
        apply_config_file(c, "/no/such/dir/scenario.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/no/such/dir/scenario.cfg"), std::string::npos);
    }
}

TEST(Config, ValidateNamesOffendingKey)
{
    auto c = ScenarioConfig{};
    c.env.num_ues = 0;
    try {
        validate(c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("env.num_ues"), std::string::npos);
    }
    c = ScenarioConfig{};
    c.ppo.gamma = 1.5;
    EXPECT_THROW(validate(c), ConfigError);
    c = ScenarioConfig{};
    c.env.f_min_hz = 2e9;
    EXPECT_THROW(validate(c), ConfigError);
    EXPECT_NO_THROW(validate(ScenarioConfig{}));
    EXPECT_NO_THROW(validate(make_config(Profile::Fast)));
}

TEST(Config, Profiles)
{
    const auto fast = make_config(Profile::Fast);
    EXPECT_EQ(fast.env.num_ues, 2);
    EXPECT_EQ(fast.ppo.lr, 3e-4);
    EXPECT_EQ(fast.train.episodes, 300);
    EXPECT_EQ(parse_profile("paper"), Profile::Paper);
    EXPECT_THROW(parse_profile("turbo"), ConfigError);
    const auto paper = make_config(Profile::Paper);
    EXPECT_EQ(dump_config(paper), dump_config(ScenarioConfig{}));
}
