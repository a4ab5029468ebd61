#include "ibrscan/network.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ibrscan {

void GridParams::validate() const {
    if (r_g < 0.0 || l_g < 0.0) throw ConfigError("grid R_g and L_g must be non-negative");
    if (!(omega0 > 0.0)) throw ConfigError("grid omega0 must be positive");
}

GridImpedance scr_to_impedance(double scr, double x_over_r) {
    if (!(scr > 0.0) || !(x_over_r > 0.0)) throw ConfigError("scr and x_over_r must be positive");
    if (std::isinf(scr)) return {0.0, 0.0};
    const double z = 1.0 / scr;
    const double r = z / std::sqrt(1.0 + x_over_r * x_over_r);
    return {r, r * x_over_r};
}

ScrSpec impedance_to_scr(const GridImpedance& z) {
    const double mag = std::hypot(z.r_g, z.l_g);
    if (mag == 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
    return {1.0 / mag, z.r_g > 0.0 ? z.l_g / z.r_g : std::numeric_limits<double>::infinity()};
}

OperatingPointSolution solve_operating_point(const GridImpedance& z, const OperatingPoint& target,
                                             double v_min, double v_max) {
    const Dq vt{target.v_t, 0.0};
    const Dq s_target{target.p, target.q};
    const Dq zg{z.r_g, z.l_g};
    OperatingPointSolution sol;
    sol.v_g = vt;
    if (std::abs(zg) == 0.0) return sol;

    // Unknowns: source magnitude and angle. Current into the grid is
    // (v_t - v_g) / Z and the terminal must export S_target.
    auto residual = [&](double mag, double ang) {
        const Dq i = (vt - std::polar(mag, ang)) / zg;
        return vt * std::conj(i) - s_target;
    };
    double mag = target.v_t, ang = 0.0;
    for (sol.iterations = 0; sol.iterations < 50; ++sol.iterations) {
        const Dq r = residual(mag, ang);
        sol.residual = std::abs(r);
        if (sol.residual < 1e-13) break;
        const double h = 1e-7;
        const Dq dm = (residual(mag + h, ang) - residual(mag - h, ang)) / (2.0 * h);
        const Dq da = (residual(mag, ang + h) - residual(mag, ang - h)) / (2.0 * h);
        const double det = dm.real() * da.imag() - da.real() * dm.imag();
        if (!std::isfinite(det) || std::abs(det) < 1e-14)
            throw InfeasibleOperatingPoint("two-bus power flow: singular Jacobian");
        mag -= (da.imag() * r.real() - da.real() * r.imag()) / det;
        ang -= (-dm.imag() * r.real() + dm.real() * r.imag()) / det;
        if (!std::isfinite(mag) || mag <= 0.0)
            throw InfeasibleOperatingPoint("two-bus power flow diverged");
    }
    sol.residual = std::abs(residual(mag, ang));
    if (sol.residual > 1e-10)
        throw InfeasibleOperatingPoint("two-bus power flow did not converge");
    if (mag < v_min || mag > v_max) {
        std::ostringstream msg;
        msg << "operating point needs grid source " << mag << " p.u., outside [" << v_min << ", "
            << v_max << "]";
        throw InfeasibleOperatingPoint(msg.str());
    }
    sol.v_g = std::polar(mag, ang);
    return sol;
}

std::string to_string(InjectionKind k) {
    return k == InjectionKind::SeriesVoltage ? "series-voltage" : "shunt-current";
}

std::string to_string(Axis a) { return a == Axis::D ? "d" : "q"; }

InjectionKind parse_injection_kind(const std::string& s) {
    if (s == "series-voltage" || s == "voltage") return InjectionKind::SeriesVoltage;
    if (s == "shunt-current" || s == "current") return InjectionKind::ShuntCurrent;
    throw ConfigError("unknown injection kind '" + s + "'");
}

Axis parse_axis(const std::string& s) {
    if (s == "d") return Axis::D;
    if (s == "q") return Axis::Q;
    throw ConfigError("unknown axis '" + s + "'");
}

void InjectionSpec::validate() const {
    if (!(freq_hz > 0.0)) throw ConfigError("injection frequency must be positive");
    if (!(magnitude >= 0.0)) throw ConfigError("injection magnitude must be non-negative");
    if (duration * freq_hz < 10.0 - 1e-9)
        throw ConfigError("injection must last at least 10 cycles");
}

double InjectionSpec::value(double t) const {
    const double tau = t - t_start;
    if (tau < 0.0 || tau >= duration || magnitude == 0.0) return 0.0;
    const double carrier = std::cos(kTwoPi * freq_hz * tau + phase);
    const double ramp = ramp_time();
    const double w = tau < ramp ? 0.5 * (1.0 - std::cos(std::numbers::pi * tau / ramp)) : 1.0;
    return magnitude * w * carrier;
}

double InjectionSpec::derivative(double t) const {
    const double tau = t - t_start;
    if (tau < 0.0 || tau >= duration || magnitude == 0.0) return 0.0;
    const double arg = kTwoPi * freq_hz * tau + phase;
    const double ramp = ramp_time();
    double w = 1.0, dw = 0.0;
    if (tau < ramp) {
        w = 0.5 * (1.0 - std::cos(std::numbers::pi * tau / ramp));
        dw = 0.5 * std::numbers::pi / ramp * std::sin(std::numbers::pi * tau / ramp);
    }
    return magnitude * (dw * std::cos(arg) - w * kTwoPi * freq_hz * std::sin(arg));
}

}  // namespace ibrscan
