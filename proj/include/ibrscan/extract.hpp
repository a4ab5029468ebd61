#pragma once

#include <string>
#include <vector>

#include "ibrscan/sweep.hpp"
#include "ibrscan/table.hpp"

namespace ibrscan {

struct PhasorSample {
    double freq_hz = 0.0;
    Complex v_d{}, v_q{}, i_d{}, i_q{};
};

enum class BinPolicy { Exact, Nearest };

struct ExtractOptions {
    bool correction = true;
    BinPolicy bins = BinPolicy::Exact;
    double cond_limit = 1e6;
};

// Single-sided DFT bin (2/N) sum x[n] exp(-j 2 pi k n / N); a coherent
// A cos(2 pi f t + phi) gives A exp(j phi).
Complex dft_bin(const std::vector<double>& x, long k);

// Bin index of f in the trace; throws ConfigError when f is off-bin under
// BinPolicy::Exact.
long bin_index(const Trace& trace, double freq_hz, BinPolicy policy = BinPolicy::Exact);

PhasorSample extract_phasor(const Trace& trace, double freq_hz, const ExtractOptions& opt = {});

// Y = I V^-1 from a d-axis and a q-axis experiment at the same frequency.
Mat2c admittance_two_injections(const PhasorSample& run_d, const PhasorSample& run_q,
                                double cond_limit = 1e6);

// One column of Y from a single-axis drive; requires the undriven voltage
// to stay below 1% of the driven one.
Eigen::Vector2cd admittance_direct(const PhasorSample& sample, Axis driven);

AdmittanceTable build_table(const std::vector<RunResult>& runs, const ExtractOptions& opt = {});

}  // namespace ibrscan
