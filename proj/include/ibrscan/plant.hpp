#pragma once

#include <array>
#include <span>

#include "ibrscan/types.hpp"

namespace ibrscan {

// Average-model grid-following inverter. Defaults are the reference plant:
// 200 MVA / 120 kV, coupling branch L = 0.15 p.u., R_L = 0.0015 p.u.
struct InverterParams {
    double f_nom = 60.0;       // Hz
    double s_base_mva = 200.0;
    double v_base_kv = 120.0;  // line-line rms
    double L = 0.15;           // p.u. reactance at f_nom
    double R_L = 0.0015;       // p.u.
    double kp_i = 0.5;
    double ki_i = 20.0;
    double kp_pll = 20.0;
    double ki_pll = 700.0;
    double kp_p = 0.5;
    double ki_p = 20.0;
    double kp_q = 0.5;
    double ki_q = 20.0;
    double k_droop = 20.0;  // p.u. power per p.u. frequency deviation

    double omega0() const { return kTwoPi * f_nom; }
    // Base current in kA: S / (sqrt(3) V_LL).
    double i_base_ka() const;
    void validate() const;
};

struct OperatingPoint {
    double v_t = 1.01;  // terminal voltage magnitude, p.u.
    double p = 0.975;   // active power injected into the grid, p.u.
    double q = 0.2;     // reactive power injected into the grid, p.u.
    double p_ref = 0.975;
    double q_ref = 0.2;

    // Refs equal to the delivered powers (droop inactive at nominal frequency).
    static OperatingPoint from_power(double v_t, double p, double q) { return {v_t, p, q, p, q}; }
};

// Dynamic states of the inverter. Currents are in the grid frame and flow
// out of the inverter. theta_pll is measured relative to the grid frame,
// which itself rotates at omega0.
struct InverterState {
    static constexpr std::size_t kSize = 8;

    Dq i{};     // coupling-inductor current
    Dq xi_i{};  // current-PI integrators (d, q)
    double xi_p = 0.0;
    double xi_q = 0.0;
    double theta_pll = 0.0;
    double xi_pll = 0.0;

    static InverterState from(std::span<const double> x);
    void store(std::span<double> x) const;
};

struct PllRates {
    double dtheta = 0.0;  // d(theta_pll)/dt relative to the grid frame
    double dxi = 0.0;
    double omega = 0.0;  // absolute PLL frequency, rad/s
    double f_pll = 0.0;  // Hz
};

PllRates pll_rhs(double v_q, double xi_pll, double kp, double ki, double omega0 = kOmega0);

struct PowerControlOutput {
    Dq i_ref{};
    double dxi_p = 0.0;
    double dxi_q = 0.0;
};

PowerControlOutput power_controller(double p, double q, double f_pll, double p_ref, double q_ref,
                                    double xi_p, double xi_q, const InverterParams& params);

struct CurrentControlOutput {
    Dq u_ref{};  // PLL frame
    Dq dxi{};
};

// PI current control in the PLL frame with full voltage feedforward and
// omega*L cross-coupling compensation.
CurrentControlOutput current_controller(Dq i, Dq i_ref, Dq v, Dq xi, double omega_pll,
                                        const InverterParams& params);

struct InverterRates {
    InverterState d;  // time derivatives
    Dq i_terminal{};  // grid frame, out of the inverter
    Dq u{};           // applied converter voltage, grid frame
    double p = 0.0;
    double q = 0.0;
    double f_pll = 0.0;
};

// Full inverter dynamics given the terminal voltage in the grid frame. The
// result is affine in `v_t` for a fixed state.
InverterRates inverter_rhs(const InverterState& s, Dq v_t, const InverterParams& params,
                           const OperatingPoint& refs);

// Closed-form equilibrium at a terminal voltage of v_t at angle 0 delivering
// the operating point's P and Q. Used to seed solvers and warm starts.
InverterState inverter_equilibrium(const InverterParams& params, const OperatingPoint& op);

}  // namespace ibrscan
