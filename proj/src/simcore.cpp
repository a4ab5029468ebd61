#include "ibrscan/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include "ibrscan/errors.hpp"

namespace ibrscan {

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
    if (!(t_end >= dt)) throw ConfigError("sim.t_end must be at least one time step");
    if (record_decimation < 1) throw ConfigError("sim.record_decimation must be >= 1");
}

const StateSlice& StateLayout::add(std::string name, std::size_t size) {
    if (find(name)) throw ConfigError("duplicate state slice '" + name + "'");
    slices_.push_back({std::move(name), total_, size});
    total_ += size;
    return slices_.back();
}

const StateSlice* StateLayout::find(std::string_view name) const {
    for (const auto& s : slices_)
        if (s.name == name) return &s;
    return nullptr;
}

const StateSlice& StateLayout::at(std::string_view name) const {
    if (const auto* s = find(name)) return *s;
    throw ConfigError("unknown state slice '" + std::string(name) + "'");
}

const StateSlice& StateLayout::owner(std::size_t i) const {
    for (const auto& s : slices_)
        if (i >= s.offset && i < s.offset + s.size) return s;
    throw ConfigError("state index out of range");
}

std::array<double, 2> park(const std::array<double, 3>& abc, double theta) {
    constexpr double k = 2.0 * std::numbers::pi / 3.0;
    const double d = 2.0 / 3.0 *
                     (std::cos(theta) * abc[0] + std::cos(theta - k) * abc[1] +
                      std::cos(theta + k) * abc[2]);
    const double q = -2.0 / 3.0 *
                     (std::sin(theta) * abc[0] + std::sin(theta - k) * abc[1] +
                      std::sin(theta + k) * abc[2]);
    return {d, q};
}

std::array<double, 3> inverse_park(const std::array<double, 2>& dq, double theta) {
    constexpr double k = 2.0 * std::numbers::pi / 3.0;
    auto phase = [&](double shift) {
        return std::cos(theta + shift) * dq[0] - std::sin(theta + shift) * dq[1];
    };
    return {phase(0.0), phase(-k), phase(k)};
}

void Rk4::resize(std::size_t n) {
    k1_.setZero(n);
    k2_.setZero(n);
    k3_.setZero(n);
    k4_.setZero(n);
    tmp_.setZero(n);
}

namespace {

void check_finite(const Vec& k, double t, const StateLayout* layout) {
    if (k.allFinite()) return;
    std::ostringstream msg;
    msg << "non-finite derivative at t=" << t;
    for (Eigen::Index i = 0; i < k.size(); ++i) {
        if (std::isfinite(k[i])) continue;
        if (layout && layout->size() == static_cast<std::size_t>(k.size())) {
            const auto& s = layout->owner(static_cast<std::size_t>(i));
            msg << " in slice '" << s.name << "' [" << (static_cast<std::size_t>(i) - s.offset)
                << "]";
        } else {
            msg << " at index " << i;
        }
        break;
    }
    throw DivergenceError(msg.str());
}

}  // namespace

void Rk4::step(double& t, Vec& x, const Rhs& rhs, double dt, const StateLayout* layout) {
    if (k1_.size() != x.size()) resize(static_cast<std::size_t>(x.size()));
    rhs(t, x, k1_);
    check_finite(k1_, t, layout);
    tmp_ = x + 0.5 * dt * k1_;
    rhs(t + 0.5 * dt, tmp_, k2_);
    check_finite(k2_, t, layout);
    tmp_ = x + 0.5 * dt * k2_;
    rhs(t + 0.5 * dt, tmp_, k3_);
    check_finite(k3_, t, layout);
    tmp_ = x + dt * k3_;
    rhs(t + dt, tmp_, k4_);
    check_finite(k4_, t, layout);
    x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    t += dt;
}

SimState step(const SimState& state, const Rhs& rhs, double dt) {
    if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
    SimState next = state;
    Rk4 rk(static_cast<std::size_t>(state.x.size()));
    rk.step(next.t, next.x, rhs, dt, &next.layout);
    return next;
}

SimState run_until_steady(SimState state, const Rhs& rhs, const Monitor& monitor,
                          const SteadyCriteria& criteria, double dt) {
    if (!(criteria.window > 0.0) || !(criteria.tol > 0.0))
        throw ConfigError("steady criteria need positive window and tolerance");
    const auto window_steps = static_cast<long>(std::ceil(criteria.window / dt));
    const double t_give_up = state.t + criteria.max_duration;
    Rk4 rk(static_cast<std::size_t>(state.x.size()));
    std::vector<double> channels;
    std::vector<double> lo, hi;

    while (true) {
        lo.clear();
        hi.clear();
        for (long n = 0; n < window_steps; ++n) {
            rk.step(state.t, state.x, rhs, dt, &state.layout);
            monitor(state.t, state.x, channels);
            if (lo.empty()) {
                lo = channels;
                hi = channels;
            }
            for (std::size_t c = 0; c < channels.size(); ++c) {
                lo[c] = std::min(lo[c], channels[c]);
                hi[c] = std::max(hi[c], channels[c]);
            }
        }
        bool steady = state.t >= criteria.min_time;
        for (std::size_t c = 0; steady && c < lo.size(); ++c)
            steady = (hi[c] - lo[c]) < criteria.tol;
        if (steady) return state;
        if (state.t >= t_give_up) {
            double worst = 0.0;
            for (std::size_t c = 0; c < lo.size(); ++c) worst = std::max(worst, hi[c] - lo[c]);
            std::ostringstream msg;
            msg << "no steady state within " << criteria.max_duration
                << " s (last window peak-to-peak " << worst << " > tol " << criteria.tol
                << "); operating point may be unstable";
            throw SteadyStateTimeout(msg.str());
        }
    }
}

const std::vector<double>& Trace::channel(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return channels[i];
    throw ConfigError("trace has no channel '" + std::string(name) + "'");
}

std::vector<double>& Trace::channel(std::string_view name) {
    return const_cast<std::vector<double>&>(std::as_const(*this).channel(name));
}

bool Trace::has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

void Trace::add_channel(std::string name) {
    names.push_back(std::move(name));
    channels.emplace_back();
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << "t";
    for (const auto& n : trace.names) os << ',' << n;
    os << '\n';
    char buf[32];
    for (std::size_t n = 0; n < trace.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%.17g", trace.time(n));
        os << buf;
        for (const auto& ch : trace.channels) {
            std::snprintf(buf, sizeof buf, "%.17g", ch[n]);
            os << ',' << buf;
        }
        os << '\n';
    }
}

Trace read_trace_csv(std::istream& is) {
    Trace trace;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty trace file");
    {
        std::istringstream header(line);
        std::string field;
        std::getline(header, field, ',');
        if (field != "t") throw ConfigError("trace header must start with 't'");
        while (std::getline(header, field, ',')) trace.add_channel(field);
    }
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        times.push_back(std::stod(field));
        for (auto& ch : trace.channels) {
            if (!std::getline(row, field, ',')) throw ConfigError("short row in trace file");
            ch.push_back(std::stod(field));
        }
    }
    if (!times.empty()) trace.t0 = times.front();
    if (times.size() >= 2)
    {
        // Timestamps carry rounding; sample rates are always "nice" numbers.
        const double est = static_cast<double>(times.size() - 1) / (times.back() - times.front());
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", est);
        trace.fs = std::stod(buf);
    }
    return trace;
}

}  // namespace ibrscan
