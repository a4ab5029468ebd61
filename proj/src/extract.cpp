#include "ibrscan/extract.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ibrscan/errors.hpp"
#include "ibrscan/probe.hpp"

namespace ibrscan {

Complex dft_bin(const std::vector<double>& x, long k) {
    const auto n = static_cast<long>(x.size());
    if (n == 0) return {};
    Complex acc{};
    for (long i = 0; i < n; ++i) {
        const long phase = (k * i) % n;
        acc += x[static_cast<std::size_t>(i)] * std::polar(1.0, -kTwoPi * double(phase) / double(n));
    }
    return acc * ((k % n == 0 ? 1.0 : 2.0) / double(n));
}

long bin_index(const Trace& trace, double freq_hz, BinPolicy policy) {
    const double exact = freq_hz * double(trace.size()) / trace.fs;
    const long k = std::lround(exact);
    if (policy == BinPolicy::Exact && std::abs(exact - double(k)) > 1e-6)
        throw ConfigError(fmt(freq_hz) + " Hz is not on an analysis bin of a " +
                          std::to_string(trace.size()) + "-sample window at " + fmt(trace.fs) +
                          " Hz; use plan_frequencies");
    return k;
}

PhasorSample extract_phasor(const Trace& trace, double freq_hz, const ExtractOptions& opt) {
    PhasorSample s;
    s.freq_hz = freq_hz;
    if (trace.size() == 0) throw IncompleteData("empty trace at " + fmt(freq_hz) + " Hz");
    const long k = bin_index(trace, freq_hz, opt.bins);
    std::vector<double> vd = trace.channel("v_d"), vq = trace.channel("v_q");
    std::vector<double> id = trace.channel("i_d"), iq = trace.channel("i_q");
    if (opt.correction) {
        const auto& dth = trace.channel("dtheta_filtered");
        for (std::size_t n = 0; n < trace.size(); ++n) {
            const Dq v = apply_pll_correction({vd[n], vq[n]}, dth[n]);
            const Dq i = apply_pll_correction({id[n], iq[n]}, dth[n]);
            vd[n] = v.real();
            vq[n] = v.imag();
            id[n] = i.real();
            iq[n] = i.imag();
        }
    }
    s.v_d = dft_bin(vd, k);
    s.v_q = dft_bin(vq, k);
    s.i_d = dft_bin(id, k);
    s.i_q = dft_bin(iq, k);
    return s;
}

Mat2c admittance_two_injections(const PhasorSample& run_d, const PhasorSample& run_q,
                                double cond_limit) {
    Mat2c v, i;
    v << run_d.v_d, run_q.v_d, run_d.v_q, run_q.v_q;
    i << run_d.i_d, run_q.i_d, run_d.i_q, run_q.i_q;
    const Eigen::JacobiSVD<Mat2c> svd(v);
    const auto sv = svd.singularValues();
    const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : INFINITY;
    if (!(cond <= cond_limit))
        throw NumericalError("voltage matrix at " + fmt(run_d.freq_hz) +
                             " Hz is ill-conditioned (condition number " + fmt(cond) + ")");
    return i * v.inverse();
}

Eigen::Vector2cd admittance_direct(const PhasorSample& s, Axis driven) {
    const Complex v = driven == Axis::D ? s.v_d : s.v_q;
    const Complex other = driven == Axis::D ? s.v_q : s.v_d;
    if (!(std::abs(other) < 0.01 * std::abs(v)))
        throw NumericalError("direct admittance at " + fmt(s.freq_hz) +
                             " Hz: cross-axis voltage is not negligible; use the two-injection "
                             "estimate");
    return {s.i_d / v, s.i_q / v};
}

AdmittanceTable build_table(const std::vector<RunResult>& runs, const ExtractOptions& opt) {
    std::map<double, std::pair<const RunResult*, const RunResult*>> by_freq;
    for (const auto& r : runs) {
        auto& slot = by_freq[r.spec.freq_hz];
        (r.spec.axis == Axis::D ? slot.first : slot.second) = &r;
    }
    AdmittanceTable table;
    std::string incomplete, excluded;
    for (const auto& [f, pair] : by_freq) {
        if (!pair.first || !pair.second) {
            incomplete += (incomplete.empty() ? "" : ", ") + fmt(f);
            continue;
        }
        if (!pair.first->usable() || !pair.second->usable()) {
            excluded += (excluded.empty() ? "" : " ") + fmt(f);
            continue;
        }
        const PhasorSample d = extract_phasor(pair.first->trace, f, opt);
        const PhasorSample q = extract_phasor(pair.second->trace, f, opt);
        table.add(f, admittance_two_injections(d, q, opt.cond_limit));
    }
    if (!incomplete.empty())
        throw IncompleteData("frequencies missing an axis partner: " + incomplete);
    if (!runs.empty()) {
        table.metadata["kind"] = to_string(runs.front().spec.kind);
        table.metadata["magnitude_pu"] = fmt(runs.front().spec.magnitude);
    }
    table.metadata["correction"] = opt.correction ? "on" : "off";
    if (!excluded.empty()) table.metadata["excluded_hz"] = excluded;
    return table;
}

}  // namespace ibrscan
