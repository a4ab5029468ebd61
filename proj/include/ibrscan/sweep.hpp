#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ibrscan/bench.hpp"

namespace ibrscan {

struct PlannedFrequency {
    double target_hz = 0.0;
    double freq_hz = 0.0;  // k * fs / n_samples exactly
    long k = 0;
    long n_samples = 0;
    bool near_grid_harmonic = false;  // within 0.5 Hz of 60 or 120 Hz
};

struct SweepPlan {
    double fs = 0.0;
    int min_cycles = 10;
    std::vector<PlannedFrequency> entries;

    std::vector<double> frequencies() const;
};

// Log-spaced targets moved onto exact analysis bins f = k fs / N.
SweepPlan plan_frequencies(double f_min, double f_max, int n_points, double fs, int min_cycles = 10);

// Same grid without the bin adjustment: each run injects the raw target and
// uses the window length of the nearest coherent plan.
SweepPlan uncoherent_plan(const SweepPlan& coherent);

struct SweepSpec {
    double f_min = 1.0;
    double f_max = 200.0;
    int n_points = 40;
    double magnitude = 0.01;  // p.u.
    InjectionKind kind = InjectionKind::SeriesVoltage;
    int min_cycles = 10;
    double dt = 50e-6;
    int decimation = 10;
    double settle_min = 1.0;  // s discarded before each analysis window
    int settle_cycles = 2;
    double noise = 0.0;  // std-dev of white noise added to v/i channels, p.u.
    std::uint64_t seed = 1;
    bool coherent = true;
    int jobs = 1;

    double fs() const { return 1.0 / (dt * decimation); }
    void validate() const;
};

struct RunResult {
    InjectionSpec spec;
    Trace trace;  // analysis window only
    std::string status = "ok";  // ok | nonlinear | diverged
    double harmonic_ratio = 0.0;
    std::string diagnostic;

    bool usable() const { return status != "diverged"; }
};

// Both axis runs for one plan entry, each restored from the snapshot.
std::pair<RunResult, RunResult> execute_pair(const Snapshot<BenchModel>& snapshot,
                                             const PlannedFrequency& entry, const SweepSpec& spec,
                                             std::size_t index = 0);

RunResult execute_run(const Snapshot<BenchModel>& snapshot, const PlannedFrequency& entry,
                      Axis axis, const SweepSpec& spec, std::size_t index = 0);

struct SweepResult {
    SweepPlan plan;
    std::vector<RunResult> runs;  // ordered by (frequency, axis)
    std::vector<std::string> warnings;
};

SweepResult run_sweep(const Snapshot<BenchModel>& snapshot, const SweepSpec& spec);
SweepResult run_sweep(const Snapshot<BenchModel>& snapshot, const SweepSpec& spec,
                      const SweepPlan& plan);

// Ratio above which a 2f line marks a run as nonlinear.
inline constexpr double kNonlinearRatio = 0.02;

// Manifest CSV: freq_hz,axis,kind,magnitude_pu,n_samples,status
void write_manifest(std::ostream& os, const std::vector<RunResult>& runs);
struct ManifestRow {
    double freq_hz = 0.0;
    Axis axis = Axis::D;
    InjectionKind kind = InjectionKind::SeriesVoltage;
    double magnitude = 0.0;
    long n_samples = 0;
    std::string status;
};
std::vector<ManifestRow> read_manifest(std::istream& is);

// Trace file name for a run inside a run store directory.
std::string run_file_name(std::size_t index, Axis axis);

void save_run_store(const std::string& dir, const SweepResult& sweep);
std::vector<RunResult> load_run_store(const std::string& dir);

}  // namespace ibrscan
