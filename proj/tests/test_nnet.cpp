#include "semoff/nnet.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace semoff;
using nnet::DenseNet;

namespace {

/// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
/// turning round-off into a large relative error.
double grad_err(double a, double n, double floor = 1e-3)
{
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

double weighted_output(const DenseNet& net, std::span<const double> x, std::span<const double> w)
{
    const auto y = net.forward(x);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += w[k] * y[k];
    return s;
}

} // namespace

TEST(DenseNet, ZeroParametersGiveZeroOutput)
{
    DenseNet net({3, 4, 2}, 1);
    std::vector<double> zero(net.num_params(), 0.0);
    net.set_params(zero);
    for (double v : net.forward(std::vector<double>{1.0, -2.0, 3.0})) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, IdentityLayerIsIdentity)
{
    nnet::PolicyParams p{{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}};
    const auto net = DenseNet::from_params(p);
    const std::vector<double> x{0.3, -7.0, 2.5};
    EXPECT_EQ(net.forward(x), x);
}

TEST(DenseNet, GoldenForwardFromSeededInit)
{
    DenseNet net({6, 64, 64, 5}, 3, 0.01);
    const auto y = net.forward(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const std::vector<double> golden{0.0037879157255969521, -0.0059864984424334352, -0.0050147039401125942,
                                     0.0012699532041342445, -0.0038096465231494802};
    ASSERT_EQ(y.size(), golden.size());
    for (std::size_t k = 0; k < y.size(); ++k) EXPECT_EQ(y[k], golden[k]) << k;
}

TEST(DenseNet, SeededInitIsReproducibleAndBounded)
{
    DenseNet a({6, 8, 3}, 42), b({6, 8, 3}, 42), c({6, 8, 3}, 43);
    EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
    const double bound = std::sqrt(6.0 / 6.0);
    for (std::size_t i = 0; i < 6 * 8; ++i) EXPECT_LE(std::abs(a.params()[i]), bound);
    for (std::size_t i = 6 * 8; i < 6 * 8 + 8; ++i) EXPECT_EQ(a.params()[i], 0.0);
}

TEST(DenseNet, FlattenUnflattenRoundTrip)
{
    DenseNet a({4, 5, 2}, 7);
    const auto p = a.flatten();
    DenseNet b({4, 5, 2}, 8);
    b.unflatten(p);
    EXPECT_EQ(b.flatten().values, p.values);
    EXPECT_EQ(DenseNet::from_params(p).flatten().values, p.values);
    EXPECT_THROW(DenseNet({4, 6, 2}, 1).unflatten(p), ShapeError);
    EXPECT_THROW(DenseNet::from_params({{4, 5, 2}, {1.0}}), ShapeError);
}

TEST(DenseNet, ShapeErrors)
{
    DenseNet net({3, 2}, 1);
    EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), ShapeError);
    EXPECT_THROW(DenseNet({3}, 1), ShapeError);
    EXPECT_THROW(DenseNet({3, 0, 1}, 1), ShapeError);
    DenseNet::Cache cache;
    net.forward(std::vector<double>{1, 2, 3}, cache);
    std::vector<double> g(net.num_params());
    EXPECT_THROW(net.backward(cache, std::vector<double>{1.0}, g), ShapeError);
}

TEST(DenseNet, StaleOrForeignCacheIsRejected)
{
    DenseNet net({3, 4, 2}, 1), other({3, 4, 2}, 1);
    DenseNet::Cache cache;
    net.forward(std::vector<double>{1, 2, 3}, cache);
    std::vector<double> g(net.num_params()), go{1.0, 1.0};
    EXPECT_NO_THROW(net.backward(cache, go, g));
    EXPECT_THROW(other.backward(cache, go, g), std::logic_error);
    net.mutable_params()[0] += 0.1;
    EXPECT_THROW(net.backward(cache, go, g), std::logic_error);
}

TEST(DenseNet, ZeroOutputGradientGivesZeroParameterGradient)
{
    DenseNet net({3, 4, 2}, 1);
    DenseNet::Cache cache;
    net.forward(std::vector<double>{1, 2, 3}, cache);
    std::vector<double> g(net.num_params(), 0.0);
    net.backward(cache, std::vector<double>{0.0, 0.0}, g);
    for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, BackwardIsLinearInOutputGradient)
{
    DenseNet net({3, 5, 2}, 4);
    DenseNet::Cache cache;
    net.forward(std::vector<double>{0.2, -0.4, 0.9}, cache);
    std::vector<double> ga(net.num_params()), gb(net.num_params()), gab(net.num_params());
    net.backward(cache, std::vector<double>{1.0, 0.0}, ga);
    net.backward(cache, std::vector<double>{0.0, -2.5}, gb);
    net.backward(cache, std::vector<double>{1.0, -2.5}, gab);
    for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(gab[i], ga[i] + gb[i], 1e-14);
}

TEST(DenseNet, GradientsMatchCentralDifferences)
{
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> width(1, 6), depth(0, 2);
    std::normal_distribution<double> n(0.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> sizes{static_cast<std::size_t>(width(rng))};
        for (int d = depth(rng); d >= 0; --d) sizes.push_back(static_cast<std::size_t>(width(rng)));
        sizes.push_back(static_cast<std::size_t>(width(rng)));
        DenseNet net(sizes, rng());
        // random biases too
        for (auto& p : net.mutable_params()) p += 0.1 * n(rng);
        std::vector<double> x(sizes.front()), w(sizes.back());
        for (auto& v : x) v = n(rng);
        for (auto& v : w) v = n(rng);

        DenseNet::Cache cache;
        net.forward(x, cache);
        std::vector<double> g(net.num_params(), 0.0), gin;
        net.backward(cache, w, g, &gin);
        std::vector<double> base(net.params().begin(), net.params().end());
        for (std::size_t i = 0; i < base.size(); ++i) {
            auto p = base;
            p[i] = base[i] + h;
            net.set_params(p);
            const double up = weighted_output(net, x, w);
            p[i] = base[i] - h;
            net.set_params(p);
            const double dn = weighted_output(net, x, w);
            ASSERT_LT(grad_err(g[i], (up - dn) / (2 * h)), 1e-6) << "trial " << trial << " param " << i;
        }
        net.set_params(base);
        for (std::size_t j = 0; j < x.size(); ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (weighted_output(net, xp, w) - weighted_output(net, xm, w)) / (2 * h);
            ASSERT_LT(grad_err(gin[j], fd), 1e-6) << "trial " << trial << " input " << j;
        }
    }
}

TEST(Adam, ZeroGradientLeavesParamsAndAdvancesTime)
{
    std::vector<double> p{1.0, -2.0};
    nnet::AdamState st(2);
    ASSERT_TRUE(nnet::adam_step(p, std::vector<double>{0.0, 0.0}, st, 0.1).applied);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
    EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepHandEvaluation)
{
    std::vector<double> p{0.0};
    nnet::AdamState st(1);
    nnet::adam_step(p, std::vector<double>{1.0}, st, 0.1);
    // m_hat = v_hat = 1, so delta = -0.1 / (1 + 1e-8)
    EXPECT_DOUBLE_EQ(p[0], -0.1 / (1.0 + 1e-8));
}

TEST(Adam, DeterministicAcrossIdenticalStates)
{
    std::vector<double> a{0.5, 0.25}, b = a, g{0.3, -0.7};
    nnet::AdamState sa(2), sb(2);
    for (int i = 0; i < 10; ++i) {
        nnet::adam_step(a, g, sa, 0.01);
        nnet::adam_step(b, g, sb, 0.01);
    }
    EXPECT_EQ(a, b);
    EXPECT_EQ(sa, sb);
}

TEST(Adam, NonFiniteGradientRejectedWithoutSideEffects)
{
    std::vector<double> p{1.0, 2.0};
    nnet::AdamState st(2);
    nnet::adam_step(p, std::vector<double>{0.1, 0.1}, st, 0.01);
    const auto p0 = p;
    const auto s0 = st;
    const auto r = nnet::adam_step(p, std::vector<double>{0.1, std::nan("")}, st, 0.01);
    EXPECT_FALSE(r.applied);
    EXPECT_NE(r.diagnostic.find("index 1"), std::string::npos);
    EXPECT_EQ(p, p0);
    EXPECT_EQ(st, s0);
    EXPECT_THROW(nnet::adam_step(p, std::vector<double>{0.1}, st, 0.01), ShapeError);
}

TEST(Checkpoint, BitExactRoundTrip)
{
    DenseNet a({6, 8, 5}, 1), b({6, 8, 1}, 2);
    nnet::AdamState sa(a.num_params()), sb(b.num_params());
    std::vector<double> g(a.num_params(), 0.3);
    auto pa = a.mutable_params();
    nnet::adam_step(pa, g, sa, 1e-3);
    nnet::Checkpoint ck{nnet::CheckpointKind::Ppo, 300, {a.flatten(), b.flatten()}, {sa, sb}};
    std::stringstream ss;
    nnet::write_checkpoint(ss, ck);
    const auto back = nnet::read_checkpoint(ss);
    EXPECT_EQ(back.kind, ck.kind);
    EXPECT_EQ(back.episode, 300u);
    ASSERT_EQ(back.nets.size(), 2u);
    EXPECT_EQ(back.nets[0].shape, ck.nets[0].shape);
    EXPECT_EQ(back.nets[0].values, ck.nets[0].values);
    EXPECT_EQ(back.nets[1].values, ck.nets[1].values);
    EXPECT_EQ(back.optimizers[0], sa);
    EXPECT_EQ(back.optimizers[1], sb);
}

TEST(Checkpoint, CorruptOrMissingFiles)
{
    std::stringstream bad("NOTACHECKPOINT");
    EXPECT_ANY_THROW(nnet::read_checkpoint(bad));
    nnet::Checkpoint ck{nnet::CheckpointKind::Dqn, 1, {DenseNet({2, 2}, 1).flatten()}, {}};
    std::stringstream ss;
    nnet::write_checkpoint(ss, ck);
    const auto full = ss.str();
    std::stringstream truncated(full.substr(0, full.size() - 5));
    EXPECT_ANY_THROW(nnet::read_checkpoint(truncated));
    EXPECT_THROW(nnet::load_checkpoint("/nonexistent/ckpt_1.bin"), MissingArtifact);
}
