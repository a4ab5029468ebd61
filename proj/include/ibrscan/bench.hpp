#pragma once

#include <optional>
#include <vector>

#include "ibrscan/network.hpp"
#include "ibrscan/plant.hpp"
#include "ibrscan/probe.hpp"
#include "ibrscan/simcore.hpp"

namespace ibrscan {

// What sits behind the measured terminal.
//   Inverter     the full controlled plant
//   RLBranch     a fixed source behind R + jX (the inverter with frozen controls)
//   OpenCircuit  nothing; the terminal carries only injected current
enum class DutKind { Inverter, RLBranch, OpenCircuit };

struct BranchParams {
    double r = 0.0015;
    double l = 0.15;
    Dq source{};  // grid frame
};

// Instantaneous algebraic quantities of the bench.
struct BenchSignals {
    Dq v_t{};         // terminal voltage, grid frame
    Dq i_out{};       // DUT current out of the terminal, grid frame
    Dq v_m{};         // probe frame
    Dq i_m{};         // probe frame, into the DUT
    double theta_m = 0.0;
    double dtheta_filtered = 0.0;
    double p = 0.0;
    double q = 0.0;
    double f_pll = kNominalHz;
};

// DUT + measurement probe + Thevenin grid with at most one injection source.
// State layout: "dut" (8, 2 or 0 states) followed by "probe" (4).
struct BenchModel {
    DutKind dut = DutKind::Inverter;
    InverterParams inverter;
    OperatingPoint op;
    BranchParams branch;
    GridParams grid;
    MeasurementPllConfig probe;
    std::optional<InjectionSpec> injection;

    StateLayout layout() const;
    void rhs(double t, const Vec& x, Vec& dxdt) const;
    BenchSignals signals(double t, const Vec& x) const;
    Rhs as_rhs() const;

    // Channels checked by the steady-state detector.
    Monitor monitor() const;
};

// Grid re-dispatched so the terminal holds `op` for the given impedance.
GridParams grid_for(const GridImpedance& z, const OperatingPoint& op);

// State at the algebraic equilibrium (no injection): DUT at its operating
// point, probe locked onto the terminal voltage.
SimState equilibrium_state(const BenchModel& model);
// Everything at zero except the probe, which starts at the grid angle.
SimState cold_state(const BenchModel& model);

struct SettleOptions {
    SteadyCriteria criteria{};
    double dt = 50e-6;
};

// Runs to steady state (past the probe switch release) and freezes the result.
Snapshot<BenchModel> settle(const BenchModel& model, SimState start, const SettleOptions& opt);

// Names of the recorded channels in trace order.
const std::vector<std::string>& trace_channels();

// Records n_samples at fs = 1/(dt*decimation), the first at the current
// state, advancing `state` past the last recorded sample's step.
Trace record(const BenchModel& model, SimState& state, double dt, int decimation,
             std::size_t n_samples);

// Advances without recording.
void advance(const BenchModel& model, SimState& state, double dt, long n_steps);

}  // namespace ibrscan
