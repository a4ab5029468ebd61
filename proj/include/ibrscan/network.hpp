#pragma once

#include <string>

#include "ibrscan/errors.hpp"
#include "ibrscan/plant.hpp"
#include "ibrscan/types.hpp"

namespace ibrscan {

// Thevenin grid: ideal source v_g behind R_g + jX_g (p.u.), expressed in the
// grid dq frame rotating at omega0. l_g is the p.u. reactance at nominal
// frequency, so the s-domain inductance is l_g / omega0.
struct GridParams {
    double r_g = 0.0;
    double l_g = 0.0;
    Dq v_g{1.0, 0.0};
    double omega0 = kOmega0;

    bool infinite_bus() const { return r_g == 0.0 && l_g == 0.0; }
    void validate() const;
};

struct GridImpedance {
    double r_g = 0.0;
    double l_g = 0.0;
};

GridImpedance scr_to_impedance(double scr, double x_over_r);

struct ScrSpec {
    double scr = 0.0;
    double x_over_r = 0.0;
};
ScrSpec impedance_to_scr(const GridImpedance& z);

// Smallest impedance used when an "infinite" bus must still carry a series
// source in its line.
inline constexpr GridImpedance kStiffBus{1e-6, 1e-6};

// Grid source phasor that holds the inverter terminal at v_t at angle 0
// while it exports (P, Q) through the given impedance. Newton iteration on
// the two-bus power-flow equations; throws InfeasibleOperatingPoint when the
// required source voltage leaves [v_min, v_max] or the iteration stalls.
struct OperatingPointSolution {
    Dq v_g{};
    double residual = 0.0;
    int iterations = 0;
};
OperatingPointSolution solve_operating_point(const GridImpedance& z, const OperatingPoint& target,
                                             double v_min = 0.5, double v_max = 1.5);

enum class InjectionKind { SeriesVoltage, ShuntCurrent };
enum class Axis { D, Q };

std::string to_string(InjectionKind k);
std::string to_string(Axis a);
InjectionKind parse_injection_kind(const std::string& s);
Axis parse_axis(const std::string& s);

// One single-tone perturbation. The waveform is
//   magnitude * w(t - t_start) * cos(2 pi f (t - t_start) + phase)
// along the chosen axis, with w a one-cycle raised-cosine ramp-in; it is
// zero outside [t_start, t_start + duration).
struct InjectionSpec {
    InjectionKind kind = InjectionKind::SeriesVoltage;
    Axis axis = Axis::D;
    double freq_hz = 10.0;
    double magnitude = 0.01;
    double t_start = 0.0;
    double duration = 1.0;
    double phase = 0.0;

    void validate() const;
    double ramp_time() const { return 1.0 / freq_hz; }
    double value(double t) const;
    double derivative(double t) const;
    Dq direction() const { return axis == Axis::D ? Dq{1.0, 0.0} : Dq{0.0, 1.0}; }
};

// Terminal voltage and line-current rate for the series circuit
//   device --(i_line)--> [v_series] --> R_g + jX_g --> v_g
// where the device fixes d(i_line)/dt as a function of the terminal voltage.
// That function must be affine in v_t (true for the inverter, R-L loads and
// prescribed currents); the solve is then exact.
struct TerminalSolution {
    Dq v_t{};
    Dq di_line{};
};

template <class LineRate>
TerminalSolution grid_rhs(const GridParams& grid, Dq i_line, Dq v_series, LineRate&& di_line) {
    const double l_s = grid.l_g / grid.omega0;
    const Dq z0{grid.r_g, grid.l_g};
    const Dq drop_static = grid.v_g + v_series + z0 * i_line;
    TerminalSolution out;
    if (l_s == 0.0) {
        out.v_t = drop_static;
        out.di_line = di_line(out.v_t);
        return out;
    }
    // v = drop_static + l_s * g(v) with g affine: g(v) = g0 + M v, M a real 2x2.
    const Dq g0 = di_line(Dq{0.0, 0.0});
    const Dq gd = di_line(Dq{1.0, 0.0}) - g0;
    const Dq gq = di_line(Dq{0.0, 1.0}) - g0;
    const double a11 = 1.0 - l_s * gd.real(), a12 = -l_s * gq.real();
    const double a21 = -l_s * gd.imag(), a22 = 1.0 - l_s * gq.imag();
    const Dq rhs = drop_static + l_s * g0;
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0) throw NumericalError("grid_rhs: singular terminal-voltage loop");
    out.v_t = {(a22 * rhs.real() - a12 * rhs.imag()) / det,
               (-a21 * rhs.real() + a11 * rhs.imag()) / det};
    out.di_line = g0 + gd * out.v_t.real() + gq * out.v_t.imag();
    return out;
}

}  // namespace ibrscan
