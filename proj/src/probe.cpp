#include "ibrscan/probe.hpp"

#include <cmath>

#include "ibrscan/errors.hpp"

namespace ibrscan {

std::string to_string(PllVariant v) {
    return v == PllVariant::HighBandwidth ? "high-bandwidth" : "low-bandwidth";
}

PllVariant parse_pll_variant(const std::string& s) {
    if (s == "high-bandwidth" || s == "high") return PllVariant::HighBandwidth;
    if (s == "low-bandwidth" || s == "low") return PllVariant::LowBandwidth;
    throw ConfigError("unknown PLL variant '" + s + "'");
}

namespace {

double gain_squared(const PllGains& g, double a, double w) {
    const double kp = g.kp * a, ki = g.ki * a;
    const double num = ki * ki + kp * kp * w * w;
    const double re = ki - w * w;
    return num / (re * re + kp * kp * w * w);
}

}  // namespace

PllGains design_pll_gains(double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("PLL bandwidth must be positive");
    // zeta = 1: |H|^2 = 1/2 at w = wn * sqrt(3 + sqrt(10)).
    const double wn = kTwoPi * bandwidth_hz / std::sqrt(3.0 + std::sqrt(10.0));
    return {2.0 * wn, wn * wn};
}

double pll_bandwidth_hz(const PllGains& gains, double amplitude) {
    if (!(gains.kp > 0.0) || !(gains.ki >= 0.0)) throw ConfigError("PLL gains must be positive");
    // Walk up until the response is below -3 dB and stays there, then bisect.
    double hi = 1e-3;
    while (gain_squared(gains, amplitude, hi) >= 0.5 || gain_squared(gains, amplitude, 2 * hi) >= 0.5)
        hi *= 2.0;
    double lo = hi / 2.0;
    while (gain_squared(gains, amplitude, lo) < 0.5 && lo > 1e-9) lo /= 2.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (gain_squared(gains, amplitude, mid) >= 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) / kTwoPi;
}

MeasurementPllConfig MeasurementPllConfig::high_bandwidth() { return {}; }

MeasurementPllConfig MeasurementPllConfig::low_bandwidth(double bandwidth_hz) {
    MeasurementPllConfig cfg;
    cfg.variant = PllVariant::LowBandwidth;
    const PllGains g = design_pll_gains(bandwidth_hz);
    cfg.kp = g.kp;
    cfg.ki = g.ki;
    return cfg;
}

void MeasurementPllConfig::validate(double lowest_injected_hz) const {
    if (!(kp > 0.0) || ki < 0.0) throw ConfigError("probe PLL gains must be positive");
    if (!(hpf_corner > 0.0)) throw ConfigError("probe.hpf_corner must be positive");
    if (!(hpf_corner < lowest_injected_hz))
        throw ConfigError("probe.hpf_corner must lie below the lowest injected frequency");
}

ProbeState ProbeState::from(std::span<const double> x) { return {x[0], x[1], x[2], x[3]}; }

void ProbeState::store(std::span<double> x) const {
    x[0] = theta_m;
    x[1] = xi_m;
    x[2] = theta_int;
    x[3] = x_hpf;
}

ProbeReading probe_rhs(Dq v_t, Dq i_t, const ProbeState& s, const MeasurementPllConfig& cfg,
                       double t) {
    const Dq to_probe = std::polar(1.0, -s.theta_m);
    ProbeReading r;
    r.v_m = v_t * to_probe;
    r.i_m = i_t * to_probe;
    const double v_q = r.v_m.imag();
    r.omega_dev = cfg.kp * v_q + s.xi_m;
    r.d.theta_m = r.omega_dev;
    r.d.xi_m = cfg.ki * v_q;
    const bool released = t >= cfg.switch_release;
    r.d.theta_int = released ? r.omega_dev : 0.0;
    r.dtheta_filtered = s.theta_int - s.x_hpf;
    r.d.x_hpf = kTwoPi * cfg.hpf_corner * r.dtheta_filtered;
    return r;
}

Dq apply_pll_correction(Dq x_m, double dtheta_filtered) {
    const double c = std::cos(dtheta_filtered), s = std::sin(dtheta_filtered);
    return {c * x_m.real() - s * x_m.imag(), s * x_m.real() + c * x_m.imag()};
}

}  // namespace ibrscan
