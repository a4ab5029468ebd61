#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "ibrscan/bench.hpp"
#include "ibrscan/state_space.hpp"

namespace ibrscan {

// Z_g(s) = [[R + s L', -w0 L'], [w0 L', R + s L']] with L' = l_g / w0.
// `ss` is the two-state admittance realization (input v, output i) when
// l_g > 0, and the static impedance R I otherwise.
struct GridImpedanceModel {
    double r_g = 0.0;
    double l_g = 0.0;
    double omega0 = kOmega0;
    StateSpaceModel ss;

    bool static_only() const { return l_g == 0.0; }
    double l_s() const { return l_g / omega0; }
    Eigen::Matrix2d r0() const;  // Z_g(0)
    Mat2c impedance(Complex s) const;
};

GridImpedanceModel grid_impedance_ss(double r_g, double l_g, double omega0 = kOmega0);

// Feedback v_t = v_inj - Z_g Y v_t as one system from v_inj to v_t.
// Y must map voltage to current into the device.
StateSpaceModel close_loop(const StateSpaceModel& y, const GridImpedanceModel& z);

struct StabilityVerdict {
    double scr = 0.0;
    double x_over_r = 0.0;
    Eigen::VectorXcd eigenvalues;
    bool stable = true;
    Complex dominant{};

    double max_re() const { return dominant.real(); }
    double dominant_freq_hz() const { return std::abs(dominant.imag()) / kTwoPi; }
};

inline constexpr double kStabilityMargin = 1e-6;

StabilityVerdict assess(const StateSpaceModel& closed, double scr, double x_over_r);

std::vector<StabilityVerdict> scr_sweep(const StateSpaceModel& y, const std::vector<double>& scrs,
                                        double x_over_r);

// lo, lo + step, ... up to hi (inclusive within rounding).
std::vector<double> scr_grid(double lo, double hi, double step);

// Smallest grid SCR above which every point is stable while the point just
// below it is unstable. Empty when the sweep has no such transition.
std::optional<double> stability_boundary(const std::vector<StabilityVerdict>& verdicts);

struct TimeDomainOptions {
    double dt = 5e-6;
    double duration = 5.0;
    double kick = 1e-6;      // added to i_d and theta_pll right after the switch
    double blowup = 0.1;     // deviation (inf-norm of inverter states) that ends the run
    double window = 0.25;    // envelope peak window, s
    double tail = 2.0;       // trailing span checked for monotonic growth, s
};

struct TimeDomainResult {
    bool diverged = false;
    bool blew_up = false;
    double growth_rate = 0.0;  // 1/s
    double t_end = 0.0;        // simulated time after the switch
    std::vector<double> t;     // envelope samples (time after switch)
    std::vector<double> envelope;
};

// Restores the snapshot, re-dispatches the grid to the new SCR (same
// terminal operating point), kicks the inverter and watches the deviation
// from the operating point.
TimeDomainResult timedomain_stability_probe(const Snapshot<BenchModel>& snapshot, double scr_b,
                                            double x_over_r, const TimeDomainOptions& opt = {});

// Verdict CSV: scr,x_over_r,stable,max_re_eig,dominant_freq_hz
void write_verdicts_csv(std::ostream& os, const std::vector<StabilityVerdict>& verdicts);
// Eigenvalue CSV: re,im
void write_eigenvalues_csv(std::ostream& os, const Eigen::VectorXcd& eig);

}  // namespace ibrscan
