#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ibrscan/bench.hpp"
#include "ibrscan/sweep.hpp"
#include "ibrscan/vfit.hpp"

namespace ibrscan {

struct GridSpec {
    bool by_impedance = false;  // true when grid.r_g / grid.l_g were given
    double scr = std::numeric_limits<double>::infinity();
    double x_over_r = 6.0;
    double r_g = 0.0;
    double l_g = 0.0;

    GridImpedance impedance() const;
};

struct ProbeSpec {
    PllVariant variant = PllVariant::HighBandwidth;
    double bandwidth = 0.5;  // Hz, low-bandwidth variant
    double hpf_corner = 0.001;
    double switch_release = 1.0;
    double kp = 20.0;  // high-bandwidth variant
    double ki = 700.0;

    MeasurementPllConfig pll() const;
};

struct ExtractSpec {
    bool correction = true;
    double cond_limit = 1e6;
};

struct FitSpec {
    double rms_target = 1e-3;
    int max_poles = 12;
    int iterations = 30;
    bool constant_term = false;
    Weighting weighting = Weighting::Uniform;

    VfitOptions options() const;
};

struct StabilitySpec {
    double scr_min = 1.3;
    double scr_max = 4.0;
    double scr_step = 0.1;
    double x_over_r = 6.0;
    double scr_a = 4.0;
    std::string model = "fitted";  // fitted | analytic
    double dt = 5e-6;
    double duration = 5.0;
    double kick = 1e-6;
};

struct ValidateSpec {
    double tolerance = 0.02;
    double tolerance_qd = 0.10;
};

struct SimulateSpec {
    double t_end = 2.0;
    double dt = 50e-6;
    int decimation = 20;
    std::string start = "equilibrium";  // equilibrium | cold
    std::string inject = "none";        // none | d | q
    double freq = 10.0;
    double magnitude = 0.01;
    // (time, scr) grid switches at grid.x_over_r, terminal point held.
    std::vector<std::pair<double, double>> scr_schedule;
};

struct ExperimentConfig {
    InverterParams inverter;
    OperatingPoint op;
    GridSpec grid;
    SweepSpec sweep;
    ProbeSpec probe;
    ExtractSpec extract;
    FitSpec fit;
    StabilitySpec stability;
    ValidateSpec validate_spec;
    SteadyCriteria steady;
    SimulateSpec simulate;

    void validate() const;
    // Bench at the configured grid with the probe attached and no injection.
    BenchModel bench() const;
};

// Grammar, one statement per line:
//   # comment
//   section.key = value
// Values are numbers (inf allowed), true/false, or enumeration words.
// Unknown keys, duplicate keys and malformed values raise ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

// Every key with its default, in the accepted grammar.
std::string default_config_text();

}  // namespace ibrscan
