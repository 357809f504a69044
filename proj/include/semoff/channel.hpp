#ifndef SEMOFF_CHANNEL_HPP
#define SEMOFF_CHANNEL_HPP

#include "semoff/config.hpp"
#include "semoff/errors.hpp"
#include "semoff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace semoff::channel {

/// One UE's channel for one step (block fading).
struct ChannelDraw {
    double large_scale_gain = 1.0; // g, linear
    double rayleigh_coeff_sq = 1.0; // |h|^2, Exp(1)
    double subband_bw_hz = 1e5;     // W
    double noise_psd_w_hz = 1e-20;  // sigma^2
};

/// Log-distance pathloss: PL_dB = PL0 + 10 n log10(d/d0), distance clamped at d_min.
inline double pathloss_gain(double distance_m, double carrier_hz, const ChannelConfig& cfg)
{
    if (!(carrier_hz > 0)) throw ConfigError("config key 'channel.carrier_hz': must be positive");
    if (!(cfg.pathloss_exp > 0)) throw ConfigError("config key 'channel.pathloss_exp': must be positive");
    const double d = std::max(distance_m, cfg.d_min_m);
    const double pl_db = cfg.pl0_db + 10.0 * cfg.pathloss_exp * std::log10(d / cfg.d0_m);
    return std::pow(10.0, -pl_db / 10.0);
}

/// |h|^2 for h ~ CN(0,1): sum of squares of two N(0, 1/2) components.
template <class Engine>
double draw_fading(Engine& rng)
{
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double x = n(rng);
    const double y = n(rng);
    return x * x + y * y;
}

/// Linear SNR, gamma = rho p g |h|^2 / (W sigma^2).
inline double snr(int rho, double power_w, const ChannelDraw& draw)
{
    if (power_w < 0) throw std::domain_error("snr: negative transmit power");
    if (rho == 0) return 0.0;
    return power_w * draw.large_scale_gain * draw.rayleigh_coeff_sq / (draw.subband_bw_hz * draw.noise_psd_w_hz);
}

} // namespace semoff::channel

#endif // SEMOFF_CHANNEL_HPP
