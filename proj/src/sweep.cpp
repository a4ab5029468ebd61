#include "ibrscan/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "ibrscan/errors.hpp"
#include "ibrscan/extract.hpp"

namespace ibrscan {

std::vector<double> SweepPlan::frequencies() const {
    std::vector<double> f;
    for (const auto& e : entries) f.push_back(e.freq_hz);
    return f;
}

namespace {

bool near_grid_harmonic(double f) { return std::abs(f - 60.0) < 0.5 || std::abs(f - 120.0) < 0.5; }

}  // namespace

SweepPlan plan_frequencies(double f_min, double f_max, int n_points, double fs, int min_cycles) {
    if (n_points < 0) throw ConfigError("sweep.n_points must be non-negative");
    if (min_cycles < 10) throw ConfigError("sweep.min_cycles must be at least 10");
    if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
    SweepPlan plan;
    plan.fs = fs;
    plan.min_cycles = min_cycles;
    if (n_points == 0) return plan;
    if (!(f_min > 0.0) || !(f_max >= f_min))
        throw ConfigError("sweep needs 0 < f_min <= f_max");
    if (!(fs > 2.0 * f_max))
        throw ConfigError("sampling rate " + fmt(fs) + " Hz is below Nyquist for f_max = " +
                          fmt(f_max) + " Hz");
    const long k = min_cycles;
    double prev = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const double target =
            n_points == 1 ? f_min : f_min * std::pow(f_max / f_min, double(i) / (n_points - 1));
        long n = std::lround(k * fs / target);
        while (n > 2 * k && k * fs / n <= prev) --n;
        if (n <= 2 * k || k * fs / n <= prev)
            throw ConfigError("cannot place " + std::to_string(n_points) +
                              " distinct coherent frequencies below " + fmt(f_max) + " Hz at fs = " +
                              fmt(fs) + " Hz");
        PlannedFrequency e;
        e.target_hz = target;
        e.k = k;
        e.n_samples = n;
        e.freq_hz = k * fs / n;
        e.near_grid_harmonic = near_grid_harmonic(e.freq_hz);
        prev = e.freq_hz;
        plan.entries.push_back(e);
    }
    return plan;
}

SweepPlan uncoherent_plan(const SweepPlan& coherent) {
    SweepPlan p = coherent;
    for (auto& e : p.entries) {
        e.freq_hz = e.target_hz;
        e.near_grid_harmonic = near_grid_harmonic(e.freq_hz);
    }
    return p;
}

void SweepSpec::validate() const {
    if (n_points < 0) throw ConfigError("sweep.n_points must be non-negative");
    if (!(magnitude >= 0.0)) throw ConfigError("sweep.magnitude must be non-negative");
    if (n_points > 0) {
        if (!(f_min > 0.0) || !(f_max >= f_min))
            throw ConfigError("sweep frequencies need 0 < f_min <= f_max");
        if (n_points > 1 && !(f_max > f_min))
            throw ConfigError("sweep.f_max must exceed sweep.f_min for more than one point");
    }
    if (!(dt > 0.0)) throw ConfigError("sweep.dt must be positive");
    if (decimation < 1) throw ConfigError("sweep.decimation must be >= 1");
    if (min_cycles < 10) throw ConfigError("sweep.min_cycles must be at least 10");
    if (settle_min < 0.0 || settle_cycles < 2)
        throw ConfigError("sweep settle margin must be at least 2 cycles");
    if (noise < 0.0) throw ConfigError("sweep.noise must be non-negative");
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    if (n_points > 0 && !(fs() > 2.0 * f_max))
        throw ConfigError("sampling rate " + fmt(fs()) + " Hz is below Nyquist for f_max");
}

RunResult execute_run(const Snapshot<BenchModel>& snapshot, const PlannedFrequency& entry,
                      Axis axis, const SweepSpec& spec, std::size_t index) {
    BenchModel model = snapshot.model;
    SimState state = snapshot.state;
    const double f = entry.freq_hz;
    const double settle = std::max(spec.settle_cycles / f, spec.settle_min);
    const long settle_samples = static_cast<long>(std::ceil(settle / (spec.dt * spec.decimation)));
    const long settle_steps = settle_samples * spec.decimation;

    RunResult r;
    r.spec.kind = spec.kind;
    r.spec.axis = axis;
    r.spec.freq_hz = f;
    r.spec.magnitude = spec.magnitude;
    r.spec.t_start = state.t;
    r.spec.duration = (settle_steps + (entry.n_samples + 1) * spec.decimation) * spec.dt;
    model.injection = r.spec;

    try {
        advance(model, state, spec.dt, settle_steps);
        r.trace = record(model, state, spec.dt, spec.decimation,
                         static_cast<std::size_t>(entry.n_samples));
    } catch (const DivergenceError& e) {
        r.status = "diverged";
        r.diagnostic = e.what();
        r.trace = Trace{};
        return r;
    }
    for (const auto& ch : r.trace.channels)
        for (double v : ch)
            if (!std::isfinite(v) || std::abs(v) > 1e3) {
                r.status = "diverged";
                r.diagnostic = "response left the small-signal range";
                return r;
            }

    if (spec.noise > 0.0) {
        std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(index),
                          static_cast<std::uint64_t>(axis == Axis::D ? 0 : 1)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, spec.noise);
        for (const char* name : {"v_d", "v_q", "i_d", "i_q"})
            for (double& v : r.trace.channel(name)) v += noise(rng);
    }

    const long k = bin_index(r.trace, f, BinPolicy::Nearest);
    const long n = static_cast<long>(r.trace.size());
    if (2 * k < n / 2) {
        double fund = 0.0, harm = 0.0;
        for (const char* name : {"v_d", "v_q", "i_d", "i_q"}) {
            const auto& ch = r.trace.channel(name);
            fund = std::max(fund, std::abs(dft_bin(ch, k)));
            harm = std::max(harm, std::abs(dft_bin(ch, 2 * k)));
        }
        r.harmonic_ratio = fund > 0.0 ? harm / fund : 0.0;
        if (r.harmonic_ratio > kNonlinearRatio) {
            r.status = "nonlinear";
            r.diagnostic = "2f line at " + fmt(r.harmonic_ratio) + " of the fundamental";
        }
    }
    return r;
}

std::pair<RunResult, RunResult> execute_pair(const Snapshot<BenchModel>& snapshot,
                                             const PlannedFrequency& entry, const SweepSpec& spec,
                                             std::size_t index) {
    return {execute_run(snapshot, entry, Axis::D, spec, index),
            execute_run(snapshot, entry, Axis::Q, spec, index)};
}

SweepResult run_sweep(const Snapshot<BenchModel>& snapshot, const SweepSpec& spec) {
    SweepPlan plan = plan_frequencies(spec.f_min, spec.f_max, spec.n_points, spec.fs(), spec.min_cycles);
    if (!spec.coherent) plan = uncoherent_plan(plan);
    return run_sweep(snapshot, spec, plan);
}

SweepResult run_sweep(const Snapshot<BenchModel>& snapshot, const SweepSpec& spec,
                      const SweepPlan& plan) {
    spec.validate();
    SweepResult out;
    out.plan = plan;
    const std::size_t n_jobs = 2 * plan.entries.size();
    out.runs.resize(n_jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < n_jobs;) {
            const std::size_t idx = j / 2;
            out.runs[j] = execute_run(snapshot, plan.entries[idx], j % 2 ? Axis::Q : Axis::D, spec, idx);
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), n_jobs);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t j = 0; j < n_jobs; ++j) {
        const auto& r = out.runs[j];
        if (r.status != "ok")
            out.warnings.push_back(fmt(r.spec.freq_hz) + " Hz " + to_string(r.spec.axis) + ": " +
                                   r.status + " (" + r.diagnostic + ")");
    }
    for (const auto& e : plan.entries)
        if (e.near_grid_harmonic)
            out.warnings.push_back(fmt(e.freq_hz) + " Hz lies next to a grid-frequency line");
    return out;
}

void write_manifest(std::ostream& os, const std::vector<RunResult>& runs) {
    os << "freq_hz,axis,kind,magnitude_pu,n_samples,status\n";
    for (const auto& r : runs)
        os << fmt(r.spec.freq_hz) << ',' << to_string(r.spec.axis) << ',' << to_string(r.spec.kind)
           << ',' << fmt(r.spec.magnitude) << ',' << r.trace.size() << ',' << r.status << '\n';
}

std::vector<ManifestRow> read_manifest(std::istream& is) {
    std::vector<ManifestRow> rows;
    std::string line;
    if (!std::getline(is, line) || line.rfind("freq_hz,axis,kind", 0) != 0)
        throw ConfigError("manifest: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f[6];
        for (auto& s : f)
            if (!std::getline(row, s, ',')) throw ConfigError("manifest: short row '" + line + "'");
        ManifestRow m;
        try {
            m.freq_hz = std::stod(f[0]);
            m.magnitude = std::stod(f[3]);
            m.n_samples = std::stol(f[4]);
        } catch (const std::exception&) {
            throw ConfigError("manifest: bad number in '" + line + "'");
        }
        m.axis = parse_axis(f[1]);
        m.kind = parse_injection_kind(f[2]);
        m.status = f[5];
        rows.push_back(m);
    }
    return rows;
}

std::string run_file_name(std::size_t index, Axis axis) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%03zu_%s.csv", index, to_string(axis).c_str());
    return buf;
}

void save_run_store(const std::string& dir, const SweepResult& sweep) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "runs");
    {
        std::ofstream os(fs::path(dir) / "manifest.csv");
        if (!os) throw ConfigError("cannot write manifest in " + dir);
        write_manifest(os, sweep.runs);
    }
    for (std::size_t j = 0; j < sweep.runs.size(); ++j) {
        std::ofstream os(fs::path(dir) / "runs" / run_file_name(j / 2, sweep.runs[j].spec.axis));
        Trace tr = sweep.runs[j].trace;
        if (tr.names.empty())
            for (const auto& n : trace_channels()) tr.add_channel(n);
        write_trace_csv(os, tr);
    }
}

std::vector<RunResult> load_run_store(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "manifest.csv");
    if (!is) throw ConfigError("no manifest.csv in " + dir);
    const auto rows = read_manifest(is);
    std::vector<RunResult> runs;
    std::vector<double> seen;
    for (const auto& m : rows) {
        // Runs are written in (frequency, axis) order, one index per frequency.
        auto it = std::find(seen.begin(), seen.end(), m.freq_hz);
        const std::size_t idx = static_cast<std::size_t>(it - seen.begin());
        if (it == seen.end()) seen.push_back(m.freq_hz);
        RunResult r;
        r.spec.kind = m.kind;
        r.spec.axis = m.axis;
        r.spec.freq_hz = m.freq_hz;
        r.spec.magnitude = m.magnitude;
        r.status = m.status;
        const fs::path p = fs::path(dir) / "runs" / run_file_name(idx, m.axis);
        std::ifstream ts(p);
        if (!ts) throw IncompleteData("missing trace " + p.string());
        r.trace = read_trace_csv(ts);
        if (r.usable() && static_cast<long>(r.trace.size()) != m.n_samples)
            throw IncompleteData("trace " + p.string() + " is truncated");
        runs.push_back(std::move(r));
    }
    return runs;
}

}  // namespace ibrscan
