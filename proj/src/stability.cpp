#include "ibrscan/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ibrscan/errors.hpp"
#include "ibrscan/table.hpp"

namespace ibrscan {

Eigen::Matrix2d GridImpedanceModel::r0() const {
    Eigen::Matrix2d m;
    m << r_g, -l_g, l_g, r_g;
    return m;
}

Mat2c GridImpedanceModel::impedance(Complex s) const {
    return r0().cast<Complex>() + s * l_s() * Mat2c::Identity();
}

GridImpedanceModel grid_impedance_ss(double r_g, double l_g, double omega0) {
    if (r_g < 0.0 || l_g < 0.0 || !(omega0 > 0.0))
        throw ConfigError("grid impedance needs R_g, L_g >= 0 and omega0 > 0");
    GridImpedanceModel z{r_g, l_g, omega0, {}};
    if (l_g == 0.0) {
        z.ss = StateSpaceModel::static_gain(r_g * Mat::Identity(2, 2));
        return z;
    }
    const double k = omega0 / l_g;
    z.ss.A.resize(2, 2);
    z.ss.A << -r_g * k, l_g * k, -l_g * k, -r_g * k;
    z.ss.B = k * Mat::Identity(2, 2);
    z.ss.C = Mat::Identity(2, 2);
    z.ss.D = Mat::Zero(2, 2);
    return z;
}

StateSpaceModel close_loop(const StateSpaceModel& y, const GridImpedanceModel& z) {
    y.validate();
    if (y.n_inputs() != 2 || y.n_outputs() != 2) throw ConfigError("close_loop needs a 2x2 admittance");
    const Mat i2 = Mat::Identity(2, 2);
    const Mat r0 = z.r0();
    const double ls = z.l_s();
    const Mat& a = y.A;
    const Mat& b = y.B;
    const Mat& c = y.C;
    const Mat& d = y.D;
    const bool has_d = d.cwiseAbs().maxCoeff() > 0.0;

    auto inverse2 = [](const Mat& m, const char* what) {
        Eigen::FullPivLU<Mat> lu(m);
        if (!lu.isInvertible() || std::abs(lu.rcond()) < 1e-14)
            throw NumericalError(std::string("close_loop: singular algebraic loop (") + what + ")");
        return Mat(lu.inverse());
    };

    StateSpaceModel cl;
    if (ls == 0.0) {
        const Mat m = inverse2(i2 + r0 * d, "I + Z D");
        cl.A = a - b * m * r0 * c;
        cl.B = b * m;
        cl.C = -m * r0 * c;
        cl.D = m;
        return cl;
    }
    const Mat cz = r0 * c + ls * c * a;
    if (!has_d) {
        const Mat m = inverse2(i2 + ls * c * b, "I + L' C B");
        cl.A = a - b * m * cz;
        cl.B = b * m;
        cl.C = -m * cz;
        cl.D = m;
        return cl;
    }
    // A direct feedthrough makes the terminal voltage a state:
    //   L' D v' = u - (R0 C + L' C A) x - (I + R0 D + L' C B) v
    const Mat g = inverse2(ls * d, "L' D");
    const Mat k = i2 + r0 * d + ls * c * b;
    const auto n = a.rows();
    cl.A = Mat::Zero(n + 2, n + 2);
    cl.A.topLeftCorner(n, n) = a;
    cl.A.topRightCorner(n, 2) = b;
    cl.A.bottomLeftCorner(2, n) = -g * cz;
    cl.A.bottomRightCorner(2, 2) = -g * k;
    cl.B = Mat::Zero(n + 2, 2);
    cl.B.bottomRows(2) = g;
    cl.C = Mat::Zero(2, n + 2);
    cl.C.rightCols(2) = i2;
    cl.D = Mat::Zero(2, 2);
    return cl;
}

StabilityVerdict assess(const StateSpaceModel& closed, double scr, double x_over_r) {
    StabilityVerdict v;
    v.scr = scr;
    v.x_over_r = x_over_r;
    v.eigenvalues = closed.eigenvalues();
    v.dominant = {-std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& l : v.eigenvalues)
        if (l.real() > v.dominant.real() ||
            (l.real() == v.dominant.real() && std::abs(l.imag()) > std::abs(v.dominant.imag())))
            v.dominant = l;
    v.stable = v.dominant.real() < -kStabilityMargin;
    return v;
}

std::vector<StabilityVerdict> scr_sweep(const StateSpaceModel& y, const std::vector<double>& scrs,
                                        double x_over_r) {
    std::vector<double> sorted = scrs;
    std::sort(sorted.begin(), sorted.end());
    std::vector<StabilityVerdict> out;
    for (double scr : sorted) {
        const GridImpedance gi = scr_to_impedance(scr, x_over_r);
        out.push_back(assess(close_loop(y, grid_impedance_ss(gi.r_g, gi.l_g)), scr, x_over_r));
    }
    return out;
}

std::vector<double> scr_grid(double lo, double hi, double step) {
    if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0) || !std::isfinite(hi)) throw ConfigError("bad SCR grid");
    std::vector<double> g;
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) g.push_back(std::round((lo + k * step) * 1e9) / 1e9);
    return g;
}

std::optional<double> stability_boundary(const std::vector<StabilityVerdict>& v) {
    if (v.empty() || !v.back().stable) return std::nullopt;
    std::size_t k = v.size() - 1;
    while (k > 0 && v[k - 1].stable) --k;
    if (k == 0) return std::nullopt;
    return v[k].scr;
}

namespace {

double slope(const std::vector<double>& t, const std::vector<double>& y) {
    const auto n = static_cast<double>(t.size());
    if (t.size() < 2) return 0.0;
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    const double den = n * stt - st * st;
    return den > 0.0 ? (n * sty - st * sy) / den : 0.0;
}

}  // namespace

TimeDomainResult timedomain_stability_probe(const Snapshot<BenchModel>& snapshot, double scr_b,
                                            double x_over_r, const TimeDomainOptions& opt) {
    if (snapshot.model.dut != DutKind::Inverter)
        throw ConfigError("time-domain stability probe needs the inverter as device");
    BenchModel model = snapshot.model;
    model.injection.reset();
    model.grid = grid_for(scr_to_impedance(scr_b, x_over_r), model.op);
    SimState state = snapshot.state;

    Vec ref(InverterState::kSize);
    inverter_equilibrium(model.inverter, model.op).store({ref.data(), InverterState::kSize});
    state.x[0] += opt.kick;
    state.x[6] += opt.kick;

    const double t0 = state.t;
    const Rhs rhs = model.as_rhs();
    Rk4 rk(static_cast<std::size_t>(state.x.size()));
    const long n_steps = std::lround(opt.duration / opt.dt);
    std::vector<double> ts, es;
    ts.reserve(static_cast<std::size_t>(n_steps) + 1);
    es.reserve(static_cast<std::size_t>(n_steps) + 1);
    auto deviation = [&] { return (state.x.head(InverterState::kSize) - ref).lpNorm<Eigen::Infinity>(); };
    TimeDomainResult res;
    ts.push_back(0.0);
    es.push_back(deviation());
    for (long n = 0; n < n_steps; ++n) {
        try {
            rk.step(state.t, state.x, rhs, opt.dt, &state.layout);
        } catch (const DivergenceError&) {
            res.blew_up = true;
            break;
        }
        const double e = deviation();
        ts.push_back(state.t - t0);
        es.push_back(e);
        if (!std::isfinite(e) || e > opt.blowup) {
            res.blew_up = true;
            break;
        }
    }
    res.t_end = ts.back();

    if (res.blew_up) {
        // Growth over the linear part: from half the run until the
        // deviation first passes a tenth of the blow-up threshold.
        std::vector<double> t, y;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (!std::isfinite(es[i]) || es[i] > 0.1 * opt.blowup) break;
            if (ts[i] >= 0.5 * res.t_end && es[i] > 0.0) {
                t.push_back(ts[i]);
                y.push_back(std::log(es[i]));
            }
        }
        res.growth_rate = slope(t, y);
        res.diverged = true;
        res.t = ts;
        res.envelope = es;
        return res;
    }

    // Peak envelope over fixed windows.
    const auto per = std::max<long>(1, std::lround(opt.window / opt.dt));
    for (std::size_t i = 0; i < es.size(); i += static_cast<std::size_t>(per)) {
        double peak = 0.0;
        const std::size_t end = std::min(es.size(), i + static_cast<std::size_t>(per));
        for (std::size_t j = i; j < end; ++j) peak = std::max(peak, es[j]);
        if (end - i < static_cast<std::size_t>(per)) break;
        res.t.push_back(ts[end - 1]);
        res.envelope.push_back(peak);
    }
    std::vector<double> t, y;
    bool monotonic = true;
    double prev = -1.0;
    for (std::size_t i = 0; i < res.t.size(); ++i) {
        if (res.t[i] < res.t_end - opt.tail) continue;
        if (res.envelope[i] <= prev) monotonic = false;
        prev = res.envelope[i];
        if (res.envelope[i] > 1e-13) {
            t.push_back(res.t[i]);
            y.push_back(std::log(res.envelope[i]));
        }
    }
    res.growth_rate = t.size() >= 2 ? slope(t, y) : 0.0;
    res.diverged = monotonic && t.size() >= 2 && res.growth_rate > 0.0;
    return res;
}

void write_verdicts_csv(std::ostream& os, const std::vector<StabilityVerdict>& verdicts) {
    os << "scr,x_over_r,stable,max_re_eig,dominant_freq_hz\n";
    for (const auto& v : verdicts)
        os << fmt(v.scr) << ',' << fmt(v.x_over_r) << ',' << (v.stable ? 1 : 0) << ','
           << fmt(v.max_re()) << ',' << fmt(v.dominant_freq_hz()) << '\n';
}

void write_eigenvalues_csv(std::ostream& os, const Eigen::VectorXcd& eig) {
    os << "re,im\n";
    for (const auto& l : eig) os << fmt(l.real()) << ',' << fmt(l.imag()) << '\n';
}

}  // namespace ibrscan
