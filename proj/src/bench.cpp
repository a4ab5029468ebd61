#include "ibrscan/bench.hpp"

#include <cmath>

namespace ibrscan {

namespace {

std::size_t dut_states(DutKind k) {
    switch (k) {
        case DutKind::Inverter: return InverterState::kSize;
        case DutKind::RLBranch: return 2;
        case DutKind::OpenCircuit: return 0;
    }
    return 0;
}

struct Evaluation {
    BenchSignals sig;
    Dq di_out{};
    InverterRates inv;
    ProbeReading probe;
};

Evaluation evaluate(const BenchModel& m, double t, const Vec& x) {
    const std::size_t n_dut = dut_states(m.dut);
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    const ProbeState ps = ProbeState::from(xs.subspan(n_dut, ProbeState::kSize));
    const Dq to_grid = std::polar(1.0, ps.theta_m);

    Dq v_series{}, i_inj{};
    double a = 0.0, da = 0.0;
    Dq dir{};
    bool shunt = false;
    if (m.injection) {
        a = m.injection->value(t);
        da = m.injection->derivative(t);
        dir = m.injection->direction();
        if (m.injection->kind == InjectionKind::SeriesVoltage)
            v_series = a * dir * to_grid;
        else {
            shunt = true;
            i_inj = a * dir * to_grid;
        }
    }

    InverterState inv_state;
    Dq i_out{};
    if (m.dut == DutKind::Inverter) {
        inv_state = InverterState::from(xs.first(n_dut));
        i_out = inv_state.i;
    } else if (m.dut == DutKind::RLBranch) {
        i_out = {x[0], x[1]};
    }

    const double w0 = m.grid.omega0;
    auto di_out_at = [&](Dq v) -> Dq {
        switch (m.dut) {
            case DutKind::Inverter: return inverter_rhs(inv_state, v, m.inverter, m.op).d.i;
            case DutKind::RLBranch:
                return (m.branch.source - v - Dq{m.branch.r, m.branch.l} * i_out) * (w0 / m.branch.l);
            case DutKind::OpenCircuit: return {};
        }
        return {};
    };
    auto di_line = [&](Dq v) -> Dq {
        Dq d = di_out_at(v);
        if (shunt) {
            const double omega_m = m.probe.kp * (v / to_grid).imag() + ps.xi_m;
            d += (da * dir + Dq{0.0, omega_m} * a * dir) * to_grid;
        }
        return d;
    };

    const TerminalSolution ts = grid_rhs(m.grid, i_out + i_inj, v_series, di_line);

    Evaluation e;
    e.sig.v_t = ts.v_t;
    e.sig.i_out = i_out;
    if (m.dut == DutKind::Inverter) {
        e.inv = inverter_rhs(inv_state, ts.v_t, m.inverter, m.op);
        e.di_out = e.inv.d.i;
        e.sig.p = e.inv.p;
        e.sig.q = e.inv.q;
        e.sig.f_pll = e.inv.f_pll;
    } else {
        e.di_out = di_out_at(ts.v_t);
        const Dq s = ts.v_t * std::conj(i_out);
        e.sig.p = s.real();
        e.sig.q = s.imag();
    }
    e.probe = probe_rhs(ts.v_t, -i_out, ps, m.probe, t);
    e.sig.v_m = e.probe.v_m;
    e.sig.i_m = e.probe.i_m;
    e.sig.theta_m = ps.theta_m;
    e.sig.dtheta_filtered = e.probe.dtheta_filtered;
    return e;
}

}  // namespace

StateLayout BenchModel::layout() const {
    StateLayout l;
    l.add("dut", dut_states(dut));
    l.add("probe", ProbeState::kSize);
    return l;
}

void BenchModel::rhs(double t, const Vec& x, Vec& dxdt) const {
    const Evaluation e = evaluate(*this, t, x);
    const std::size_t n_dut = dut_states(dut);
    std::span<double> out(dxdt.data(), static_cast<std::size_t>(dxdt.size()));
    if (dut == DutKind::Inverter) {
        e.inv.d.store(out.first(n_dut));
    } else if (dut == DutKind::RLBranch) {
        out[0] = e.di_out.real();
        out[1] = e.di_out.imag();
    }
    e.probe.d.store(out.subspan(n_dut, ProbeState::kSize));
}

BenchSignals BenchModel::signals(double t, const Vec& x) const { return evaluate(*this, t, x).sig; }

Rhs BenchModel::as_rhs() const {
    return [m = *this](double t, const Vec& x, Vec& dxdt) { m.rhs(t, x, dxdt); };
}

Monitor BenchModel::monitor() const {
    return [m = *this](double t, const Vec& x, std::vector<double>& out) {
        const BenchSignals s = m.signals(t, x);
        out.assign({s.v_m.real(), s.v_m.imag(), s.i_m.real(), s.i_m.imag(), s.p, s.q,
                    s.f_pll / kNominalHz, s.dtheta_filtered});
    };
}

GridParams grid_for(const GridImpedance& z, const OperatingPoint& op) {
    GridParams g;
    g.r_g = z.r_g;
    g.l_g = z.l_g;
    g.v_g = solve_operating_point(z, op).v_g;
    return g;
}

SimState equilibrium_state(const BenchModel& model) {
    SimState s;
    s.layout = model.layout();
    s.x = Vec::Zero(static_cast<Eigen::Index>(s.layout.size()));
    std::span<double> xs(s.x.data(), static_cast<std::size_t>(s.x.size()));
    const std::size_t n_dut = dut_states(model.dut);
    ProbeState ps;
    switch (model.dut) {
        case DutKind::Inverter: {
            inverter_equilibrium(model.inverter, model.op).store(xs.first(n_dut));
            const Dq i = inverter_equilibrium(model.inverter, model.op).i;
            const Dq v_t = model.grid.v_g + Dq{model.grid.r_g, model.grid.l_g} * i;
            ps.theta_m = std::arg(v_t);
            break;
        }
        case DutKind::RLBranch: {
            const Dq z = Dq{model.branch.r, model.branch.l} + Dq{model.grid.r_g, model.grid.l_g};
            const Dq i = (model.branch.source - model.grid.v_g) / z;
            xs[0] = i.real();
            xs[1] = i.imag();
            ps.theta_m = std::arg(model.grid.v_g + Dq{model.grid.r_g, model.grid.l_g} * i);
            break;
        }
        case DutKind::OpenCircuit: ps.theta_m = std::arg(model.grid.v_g); break;
    }
    ps.store(xs.subspan(n_dut, ProbeState::kSize));
    return s;
}

SimState cold_state(const BenchModel& model) {
    SimState s;
    s.layout = model.layout();
    s.x = Vec::Zero(static_cast<Eigen::Index>(s.layout.size()));
    s.x[static_cast<Eigen::Index>(s.layout.at("probe").offset)] = std::arg(model.grid.v_g);
    return s;
}

Snapshot<BenchModel> settle(const BenchModel& model, SimState start, const SettleOptions& opt) {
    SteadyCriteria c = opt.criteria;
    c.min_time = std::max(c.min_time, model.probe.switch_release + c.window);
    SimState s = run_until_steady(std::move(start), model.as_rhs(), model.monitor(), c, opt.dt);
    SimConfig cfg;
    cfg.dt = opt.dt;
    return {model, cfg, std::move(s)};
}

const std::vector<std::string>& trace_channels() {
    static const std::vector<std::string> names{"v_d", "v_q", "i_d", "i_q", "dtheta_filtered",
                                                "p", "q", "f_pll"};
    return names;
}

Trace record(const BenchModel& model, SimState& state, double dt, int decimation,
             std::size_t n_samples) {
    Trace tr;
    tr.t0 = state.t;
    tr.fs = 1.0 / (dt * decimation);
    for (const auto& n : trace_channels()) tr.add_channel(n);
    for (auto& ch : tr.channels) ch.reserve(n_samples);
    const Rhs rhs = model.as_rhs();
    Rk4 rk(static_cast<std::size_t>(state.x.size()));
    for (std::size_t n = 0; n < n_samples; ++n) {
        const BenchSignals s = model.signals(state.t, state.x);
        const double row[] = {s.v_m.real(), s.v_m.imag(), s.i_m.real(), s.i_m.imag(),
                              s.dtheta_filtered, s.p, s.q, s.f_pll};
        for (std::size_t c = 0; c < tr.channels.size(); ++c) tr.channels[c].push_back(row[c]);
        for (int k = 0; k < decimation; ++k) rk.step(state.t, state.x, rhs, dt, &state.layout);
    }
    return tr;
}

void advance(const BenchModel& model, SimState& state, double dt, long n_steps) {
    const Rhs rhs = model.as_rhs();
    Rk4 rk(static_cast<std::size_t>(state.x.size()));
    for (long n = 0; n < n_steps; ++n) rk.step(state.t, state.x, rhs, dt, &state.layout);
}

}  // namespace ibrscan
