#pragma once

#include <span>
#include <string>

#include "ibrscan/types.hpp"

namespace ibrscan {

enum class PllVariant { HighBandwidth, LowBandwidth };

std::string to_string(PllVariant v);
PllVariant parse_pll_variant(const std::string& s);

struct PllGains {
    double kp = 0.0;
    double ki = 0.0;
};

// Gains of a damping-one synchronous-frame PLL whose closed-loop -3 dB point
// equals `bandwidth_hz` for a unit-amplitude input.
PllGains design_pll_gains(double bandwidth_hz);

// Closed-loop -3 dB frequency (Hz) of the PLL angle-tracking loop
//   H(s) = (kp a s + ki a) / (s^2 + kp a s + ki a),  a = input amplitude,
// located by bisection on |H(j w)|^2 = 1/2. The loop is low-pass with a
// resonant peak when under-damped; the reported point is where the response
// finally falls below -3 dB.
double pll_bandwidth_hz(const PllGains& gains, double amplitude = 1.0);

// Measurement PLL used by the probe. The angle correction chain is
// PI output -> integrator -> first-order high-pass -> dtheta_filtered; a
// startup switch holds the chain's input at zero until `switch_release`.
struct MeasurementPllConfig {
    PllVariant variant = PllVariant::HighBandwidth;
    double kp = 20.0;
    double ki = 700.0;
    double hpf_corner = 0.001;    // Hz
    double switch_release = 1.0;  // s; <= 0 disables the switch

    static MeasurementPllConfig high_bandwidth();
    static MeasurementPllConfig low_bandwidth(double bandwidth_hz = 0.5);
    void validate(double lowest_injected_hz) const;
};

struct ProbeState {
    static constexpr std::size_t kSize = 4;

    double theta_m = 0.0;  // relative to the grid frame
    double xi_m = 0.0;
    double theta_int = 0.0;
    double x_hpf = 0.0;

    static ProbeState from(std::span<const double> x);
    void store(std::span<double> x) const;
};

struct ProbeReading {
    ProbeState d;                // time derivatives
    double omega_dev = 0.0;      // PI output (rad/s above nominal)
    double dtheta_filtered = 0.0;
    Dq v_m{};                    // terminal voltage in the probe frame
    Dq i_m{};                    // terminal current in the probe frame
};

// `v_t` and `i_t` arrive in the grid dq frame. Rotating them by -theta_m is
// the same as Park-transforming the phase quantities at the probe's
// absolute angle omega0*t + theta_m.
ProbeReading probe_rhs(Dq v_t, Dq i_t, const ProbeState& s, const MeasurementPllConfig& cfg,
                       double t);

// Undo the measurement-frame rotation: x = R(dtheta)^-1 x_m with
// R = [[cos, sin], [-sin, cos]].
Dq apply_pll_correction(Dq x_m, double dtheta_filtered);

}  // namespace ibrscan
