#pragma once

#include <random>
#include <vector>

#include "ibrscan/sweep.hpp"
#include "ibrscan/vfit.hpp"

namespace ibrscan::testing {

// Stable random pole-residue model: `order` poles, real ones first when the
// order is odd, the rest in conjugate pairs spread over 1..1000 rad/s.
inline RationalModel random_model(int order, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RationalModel m;
    auto residue = [&] {
        Mat2c r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r(i, j) = {2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0};
        return r;
    };
    int left = order;
    if (left % 2) {
        m.poles.push_back({-(5.0 + 50.0 * u(rng)), 0.0});
        m.residues.push_back(residue().real().cast<Complex>() * 20.0);
        --left;
    }
    for (int k = 0; k < left / 2; ++k) {
        const double w = 10.0 * std::pow(100.0, (k + u(rng)) / std::max(1, left / 2));
        const Complex p{-w * (0.05 + 0.2 * u(rng)), w};
        const Mat2c r = residue() * w * 0.5;
        m.poles.push_back(p);
        m.poles.push_back(std::conj(p));
        m.residues.push_back(r);
        m.residues.push_back(r.conjugate());
    }
    return m;
}

inline std::vector<double> log_freqs(double lo, double hi, int n) {
    std::vector<double> f(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) f[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, double(k) / (n - 1));
    return f;
}

inline AdmittanceTable sample(const RationalModel& m, const std::vector<double>& freqs) {
    AdmittanceTable t;
    for (double f : freqs) t.add(f, m.at_hz(f));
    return t;
}

// Pair of analysis-window traces whose terminal quantities follow
// i = Y v exactly, with v driven along d then q at frequency f.
inline std::pair<RunResult, RunResult> synthetic_runs(const Mat2c& y, double f, double fs, long n,
                                                      double magnitude = 0.01) {
    std::pair<RunResult, RunResult> out;
    for (int axis = 0; axis < 2; ++axis) {
        RunResult& r = axis == 0 ? out.first : out.second;
        r.spec.axis = axis == 0 ? Axis::D : Axis::Q;
        r.spec.freq_hz = f;
        r.spec.magnitude = magnitude;
        Eigen::Vector2cd v = Eigen::Vector2cd::Zero();
        v(axis) = {magnitude, 0.0};
        v(1 - axis) = {0.1 * magnitude, 0.05 * magnitude};
        const Eigen::Vector2cd i = y * v;
        r.trace.fs = fs;
        for (const char* name : {"v_d", "v_q", "i_d", "i_q", "dtheta_filtered"}) r.trace.add_channel(name);
        const Complex bias[] = {1.01, 0.0, -0.97, 0.2};
        for (long k = 0; k < n; ++k) {
            const Complex e = std::polar(1.0, kTwoPi * f * double(k) / fs);
            const Complex x[] = {v(0), v(1), i(0), i(1)};
            for (int c = 0; c < 4; ++c) r.trace.channels[c].push_back((x[c] * e).real() + bias[c].real());
            r.trace.channels[4].push_back(0.0);
        }
    }
    return out;
}

}  // namespace ibrscan::testing
