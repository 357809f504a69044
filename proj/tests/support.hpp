#pragma once

#include "semoff/config.hpp"
#include "semoff/env.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing_support {

inline double rel_err(double a, double b)
{
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("semoff_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Straight-line re-derivation of one UE's per-sentence physics, written
/// without touching the library's helpers.
struct PhysicsCase {
    // inputs
    double distance_m, pl0_db, d0_m, n_pl;
    double power_w, h2, bw_hz, noise_w_hz;
    double flops, n_local, f_local, alpha;
    double n_remote, f_remote, beta;
    double a_words, k;
    int offloaders;
    double eps; // similarity fed to the upload formula

    // outputs
    double gain() const { return 1.0 / std::pow(10.0, (pl0_db + 10.0 * n_pl * std::log10(distance_m / d0_m)) / 10.0); }
    double snr() const { return power_w * gain() * h2 / (bw_hz * noise_w_hz); }
    double t_lc() const { return flops / (n_local * f_local); }
    double e_lc() const { return alpha * t_lc() * f_local * f_local * f_local; }
    double t_ut() const { return a_words * k / (bw_hz * eps); }
    double e_ut() const { return power_w * t_ut(); }
    double t_rc() const { return flops / ((n_remote * f_remote) / offloaders); }
    double e_rc() const
    {
        const double f = f_remote / offloaders;
        return beta * t_rc() * f * f * f;
    }
};

template <class Engine>
PhysicsCase random_case(Engine& rng)
{
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    PhysicsCase c{};
    c.distance_m = u(1.0, 800.0);
    c.pl0_db = u(30.0, 60.0);
    c.d0_m = 1.0;
    c.n_pl = u(2.0, 4.0);
    c.power_w = u(0.01, 0.3);
    c.h2 = u(0.01, 5.0);
    c.bw_hz = u(1e4, 1e6);
    c.noise_w_hz = std::pow(10.0, u(-21.0, -19.0));
    c.flops = u(1e9, 1e11);
    c.n_local = u(256.0, 4096.0);
    c.f_local = u(0.5e9, 2e9);
    c.alpha = std::pow(10.0, u(-29.0, -27.0));
    c.n_remote = u(1024.0, 16384.0);
    c.f_remote = u(0.5e9, 2e9);
    c.beta = std::pow(10.0, u(-29.0, -27.0));
    c.a_words = u(5.0, 40.0);
    c.k = std::uniform_int_distribution<int>(1, 4)(rng) * 5;
    c.offloaders = std::uniform_int_distribution<int>(1, 6)(rng);
    c.eps = u(0.05, 1.0);
    return c;
}

/// Paper profile with a seeded episode already reset.
inline semoff::env::Environment make_env(semoff::ScenarioConfig cfg, std::uint64_t seed)
{
    semoff::env::Environment e(cfg, semoff::env::table_for(cfg));
    e.reset(seed);
    return e;
}

} // namespace testing_support
