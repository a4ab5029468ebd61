#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ibrscan/network.hpp"
#include "ibrscan/plant.hpp"
#include "ibrscan/state_space.hpp"

namespace ibrscan {

using VecFn = std::function<Vec(const Vec&)>;

struct Equilibrium {
    Vec x;
    double residual = 0.0;  // infinity norm of rhs(x)
    int iterations = 0;
    bool converged = false;
    std::string message;
};

// Newton iteration on f(x) = 0 with central-difference Jacobians and a
// minimum-norm step. On failure returns the seed (or best iterate) with its
// residual and converged = false.
Equilibrium newton_equilibrium(const VecFn& f, const Vec& seed, double tol = 1e-10,
                               int max_iterations = 50);

// Inverter connected to its Thevenin grid; 8 states, no probe, no injection.
struct PlantGrid {
    InverterParams inverter;
    OperatingPoint op;
    GridParams grid;

    Vec rhs(const Vec& x) const;
};

Equilibrium find_equilibrium(const PlantGrid& sys);
Equilibrium find_equilibrium(const PlantGrid& sys, const Vec& seed);

// dx = f(x, u), y = g(x, u)
using IoSystem = std::function<void(const Vec& x, const Vec& u, Vec& dx, Vec& y)>;

struct LinearizeOptions {
    double rel_step = 1e-6;
    double min_step = 1e-6;
    double richardson_tol = 1e-5;
};

// Central differences with step h = max(min_step, rel_step |x_i|), checked
// against step h/2: every entry must agree to richardson_tol relative to
// max(|J|, 1), else NumericalError naming the entry.
StateSpaceModel linearize(const IoSystem& sys, const Vec& x0, const Vec& u0, Eigen::Index n_out,
                          const LinearizeOptions& opt = {});

// Small-signal admittance of the inverter at its operating point: input the
// grid-frame terminal voltage, output the current into the inverter.
StateSpaceModel linearize_inverter(const InverterParams& params, const OperatingPoint& op,
                                   const LinearizeOptions& opt = {});

// Admittance of a bare R + jX branch behind a fixed source.
StateSpaceModel linearize_branch(double r, double l, double omega0 = kOmega0,
                                 const LinearizeOptions& opt = {});

// Autonomous inverter+grid system (B, C, D empty) around an equilibrium.
StateSpaceModel linearize_plant_grid(const PlantGrid& sys, const Equilibrium& eq,
                                     const LinearizeOptions& opt = {});

AdmittanceTable freq_response(const StateSpaceModel& ss, const std::vector<double>& freqs_hz);

}  // namespace ibrscan
