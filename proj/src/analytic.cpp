#include "ibrscan/analytic.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ibrscan/errors.hpp"

namespace ibrscan {

namespace {

Mat jacobian(const VecFn& f, const Vec& x, double rel, double min_step, double shrink = 1.0) {
    const Vec f0 = f(x);
    Mat j(f0.size(), x.size());
    Vec xp = x, xm = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = std::max(min_step, rel * std::abs(x[k])) * shrink;
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
        xp[k] = xm[k] = x[k];
    }
    return j;
}

}  // namespace

Equilibrium newton_equilibrium(const VecFn& f, const Vec& seed, double tol, int max_iterations) {
    Equilibrium eq;
    eq.x = seed;
    Vec fx = f(seed);
    eq.residual = fx.lpNorm<Eigen::Infinity>();
    Vec best = seed;
    double best_res = eq.residual;
    for (eq.iterations = 0; eq.iterations < max_iterations; ++eq.iterations) {
        if (eq.residual < tol) {
            eq.converged = true;
            return eq;
        }
        const Mat j = jacobian(f, eq.x, 1e-7, 1e-7);
        const Vec dx = Eigen::CompleteOrthogonalDecomposition<Mat>(j).solve(-fx);
        eq.x += dx;
        fx = f(eq.x);
        eq.residual = fx.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(eq.residual) || !eq.x.allFinite()) break;
        if (eq.residual < best_res) {
            best = eq.x;
            best_res = eq.residual;
        }
    }
    if (eq.residual < tol && std::isfinite(eq.residual)) {
        eq.converged = true;
        return eq;
    }
    eq.x = best;
    eq.residual = best_res;
    eq.converged = false;
    std::ostringstream msg;
    msg << "Newton did not converge; best residual " << best_res;
    eq.message = msg.str();
    return eq;
}

Vec PlantGrid::rhs(const Vec& x) const {
    const InverterState s = InverterState::from({x.data(), InverterState::kSize});
    const TerminalSolution ts = grid_rhs(grid, s.i, Dq{}, [&](Dq v) {
        return inverter_rhs(s, v, inverter, op).d.i;
    });
    const InverterRates r = inverter_rhs(s, ts.v_t, inverter, op);
    Vec out(InverterState::kSize);
    r.d.store({out.data(), InverterState::kSize});
    return out;
}

Equilibrium find_equilibrium(const PlantGrid& sys) {
    Vec seed(InverterState::kSize);
    inverter_equilibrium(sys.inverter, sys.op).store({seed.data(), InverterState::kSize});
    return find_equilibrium(sys, seed);
}

Equilibrium find_equilibrium(const PlantGrid& sys, const Vec& seed) {
    return newton_equilibrium([&](const Vec& x) { return sys.rhs(x); }, seed);
}

StateSpaceModel linearize(const IoSystem& sys, const Vec& x0, const Vec& u0, Eigen::Index n_out,
                          const LinearizeOptions& opt) {
    const auto nx = x0.size(), nu = u0.size();
    auto stacked = [&](const Vec& z) {
        Vec dx(nx), y(n_out);
        sys(z.head(nx), z.tail(nu), dx, y);
        Vec out(nx + n_out);
        out << dx, y;
        return out;
    };
    Vec z0(nx + nu);
    z0 << x0, u0;
    const Mat j1 = jacobian(stacked, z0, opt.rel_step, opt.min_step);
    const Mat j2 = jacobian(stacked, z0, opt.rel_step, opt.min_step, 0.5);
    for (Eigen::Index r = 0; r < j1.rows(); ++r)
        for (Eigen::Index c = 0; c < j1.cols(); ++c) {
            const double denom = std::max(std::abs(j1(r, c)), 1.0);
            if (!(std::abs(j1(r, c) - j2(r, c)) <= opt.richardson_tol * denom)) {
                std::ostringstream msg;
                msg << "linearization: Jacobian entry (" << r << ", " << c
                    << ") fails the step-halving check (" << j1(r, c) << " vs " << j2(r, c) << ")";
                throw NumericalError(msg.str());
            }
        }
    StateSpaceModel ss;
    ss.A = j1.topLeftCorner(nx, nx);
    ss.B = j1.topRightCorner(nx, nu);
    ss.C = j1.bottomLeftCorner(n_out, nx);
    ss.D = j1.bottomRightCorner(n_out, nu);
    return ss;
}

StateSpaceModel linearize_inverter(const InverterParams& params, const OperatingPoint& op,
                                   const LinearizeOptions& opt) {
    Vec x0(InverterState::kSize);
    inverter_equilibrium(params, op).store({x0.data(), InverterState::kSize});
    Vec u0(2);
    u0 << op.v_t, 0.0;
    auto sys = [&](const Vec& x, const Vec& u, Vec& dx, Vec& y) {
        const InverterState s = InverterState::from({x.data(), InverterState::kSize});
        const InverterRates r = inverter_rhs(s, {u[0], u[1]}, params, op);
        r.d.store({dx.data(), InverterState::kSize});
        y << -s.i.real(), -s.i.imag();
    };
    return linearize(sys, x0, u0, 2, opt);
}

StateSpaceModel linearize_branch(double r, double l, double omega0, const LinearizeOptions& opt) {
    if (!(l > 0.0)) throw ConfigError("branch inductance must be positive");
    auto sys = [&](const Vec& x, const Vec& u, Vec& dx, Vec& y) {
        // Current into the branch from the terminal toward its (fixed) source.
        const Dq i{x[0], x[1]};
        const Dq di = (Dq{u[0], u[1]} - Dq{r, l} * i) * (omega0 / l);
        dx << di.real(), di.imag();
        y << x[0], x[1];
    };
    return linearize(sys, Vec::Zero(2), Vec::Zero(2), 2, opt);
}

StateSpaceModel linearize_plant_grid(const PlantGrid& sys, const Equilibrium& eq,
                                     const LinearizeOptions& opt) {
    if (!(eq.residual < 1e-8))
        throw NumericalError("linearization needs an equilibrium with residual below 1e-8");
    auto io = [&](const Vec& x, const Vec&, Vec& dx, Vec&) { dx = sys.rhs(x); };
    StateSpaceModel ss = linearize(io, eq.x, Vec(0), 0, opt);
    return ss;
}

AdmittanceTable freq_response(const StateSpaceModel& ss, const std::vector<double>& freqs_hz) {
    return frequency_response(ss, freqs_hz);
}

}  // namespace ibrscan
