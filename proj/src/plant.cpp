#include "ibrscan/plant.hpp"

#include <cmath>

#include "ibrscan/errors.hpp"

namespace ibrscan {

double InverterParams::i_base_ka() const { return s_base_mva / (std::sqrt(3.0) * v_base_kv); }

void InverterParams::validate() const {
    if (!(f_nom > 0.0)) throw ConfigError("inverter.f must be positive");
    if (!(L > 0.0)) throw ConfigError("inverter.L must be positive");
    if (R_L < 0.0) throw ConfigError("inverter.R_L must be non-negative");
    for (double g : {kp_i, ki_i, kp_pll, ki_pll, kp_p, ki_p, kp_q, ki_q, k_droop})
        if (g < 0.0) throw ConfigError("inverter gains must be non-negative");
}

InverterState InverterState::from(std::span<const double> x) {
    InverterState s;
    s.i = {x[0], x[1]};
    s.xi_i = {x[2], x[3]};
    s.xi_p = x[4];
    s.xi_q = x[5];
    s.theta_pll = x[6];
    s.xi_pll = x[7];
    return s;
}

void InverterState::store(std::span<double> x) const {
    x[0] = i.real();
    x[1] = i.imag();
    x[2] = xi_i.real();
    x[3] = xi_i.imag();
    x[4] = xi_p;
    x[5] = xi_q;
    x[6] = theta_pll;
    x[7] = xi_pll;
}

PllRates pll_rhs(double v_q, double xi_pll, double kp, double ki, double omega0) {
    PllRates r;
    r.omega = omega0 + kp * v_q + xi_pll;
    r.dtheta = r.omega - omega0;
    r.dxi = ki * v_q;
    r.f_pll = r.omega / kTwoPi;
    return r;
}

PowerControlOutput power_controller(double p, double q, double f_pll, double p_ref, double q_ref,
                                    double xi_p, double xi_q, const InverterParams& params) {
    const double e_p = p_ref + params.k_droop * (params.f_nom - f_pll) / params.f_nom - p;
    const double e_q = q_ref - q;
    PowerControlOutput out;
    // Positive Q (export) needs negative i_q with Q = v_q i_d - v_d i_q.
    out.i_ref = {params.kp_p * e_p + xi_p, -(params.kp_q * e_q + xi_q)};
    out.dxi_p = params.ki_p * e_p;
    out.dxi_q = params.ki_q * e_q;
    return out;
}

CurrentControlOutput current_controller(Dq i, Dq i_ref, Dq v, Dq xi, double omega_pll,
                                        const InverterParams& params) {
    const Dq err = i_ref - i;
    const double w = omega_pll / params.omega0();
    CurrentControlOutput out;
    // j*w*L*i adds -wL i_q on d and +wL i_d on q.
    out.u_ref = v + params.kp_i * err + xi + Dq{0.0, w * params.L} * i;
    out.dxi = params.ki_i * err;
    return out;
}

InverterRates inverter_rhs(const InverterState& s, Dq v_t, const InverterParams& params,
                           const OperatingPoint& refs) {
    const Dq to_pll = std::polar(1.0, -s.theta_pll);
    const Dq v_p = v_t * to_pll;
    const Dq i_p = s.i * to_pll;

    const PllRates pll = pll_rhs(v_p.imag(), s.xi_pll, params.kp_pll, params.ki_pll, params.omega0());

    const Dq power = v_t * std::conj(s.i);
    const double p = power.real();
    const double q = power.imag();

    const PowerControlOutput pc =
        power_controller(p, q, pll.f_pll, refs.p_ref, refs.q_ref, s.xi_p, s.xi_q, params);
    const CurrentControlOutput cc = current_controller(i_p, pc.i_ref, v_p, s.xi_i, pll.omega, params);

    InverterRates r;
    r.u = cc.u_ref / to_pll;
    const double w0 = params.omega0();
    r.d.i = (r.u - v_t - params.R_L * s.i - Dq{0.0, params.L} * s.i) * (w0 / params.L);
    r.d.xi_i = cc.dxi;
    r.d.xi_p = pc.dxi_p;
    r.d.xi_q = pc.dxi_q;
    r.d.theta_pll = pll.dtheta;
    r.d.xi_pll = pll.dxi;
    r.i_terminal = s.i;
    r.p = p;
    r.q = q;
    r.f_pll = pll.f_pll;
    return r;
}

InverterState inverter_equilibrium(const InverterParams& params, const OperatingPoint& op) {
    InverterState s;
    const Dq v{op.v_t, 0.0};
    s.i = std::conj(Dq{op.p, op.q} / v);
    // Zero-error controllers: u = v + R i + jL i must equal v + xi + jL i.
    s.xi_i = params.R_L * s.i;
    // A fixed-frequency grid only admits P = P_ref, Q = Q_ref, so the power
    // PIs hold the whole reference in their integrators.
    s.xi_p = s.i.real();
    s.xi_q = -s.i.imag();
    s.theta_pll = 0.0;
    s.xi_pll = 0.0;
    return s;
}

}  // namespace ibrscan
