#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>

#include "ibrscan/analytic.hpp"
#include "ibrscan/config.hpp"
#include "ibrscan/extract.hpp"
#include "support.hpp"

using namespace ibrscan;

namespace {

Mat2c rl_admittance(double r, double l, double f) {
    const Complex s{0.0, kTwoPi * f};
    Mat2c z;
    z << r + s * l / kOmega0, -l, l, r + s * l / kOmega0;
    return z.inverse();
}

}  // namespace

TEST_CASE("coherent plan puts every frequency on a bin") {
    const SweepPlan plan = plan_frequencies(1.0, 200.0, 40, 2000.0, 10);
    REQUIRE(plan.entries.size() == 40);
    std::set<double> seen;
    for (const auto& e : plan.entries) {
        CHECK(e.freq_hz == doctest::Approx(e.k * plan.fs / e.n_samples).epsilon(1e-14));
        CHECK(e.k >= 10);
        CHECK(std::abs(e.freq_hz - e.target_hz) / e.target_hz < 0.05);
        CHECK(seen.insert(e.freq_hz).second);
    }
    CHECK(plan.entries.front().freq_hz == doctest::Approx(1.0));
    CHECK(plan.entries.back().freq_hz == doctest::Approx(200.0));
    CHECK(plan_frequencies(1.0, 200.0, 0, 2000.0).entries.empty());
    CHECK_THROWS_AS(plan_frequencies(1.0, 1500.0, 10, 2000.0), ConfigError);
}

TEST_CASE("frequencies near grid harmonics are flagged") {
    const SweepPlan plan = plan_frequencies(59.8, 60.2, 3, 2000.0, 10);
    for (const auto& e : plan.entries) CHECK(e.near_grid_harmonic);
}

TEST_CASE("uncoherent plan keeps raw targets") {
    const SweepPlan c = plan_frequencies(1.0, 200.0, 12, 2000.0);
    const SweepPlan u = uncoherent_plan(c);
    for (std::size_t k = 0; k < c.entries.size(); ++k) {
        CHECK(u.entries[k].freq_hz == c.entries[k].target_hz);
        CHECK(u.entries[k].n_samples == c.entries[k].n_samples);
    }
}

TEST_CASE("dft bin recovers a coherent cosine exactly") {
    const long n = 400, k = 7;
    std::vector<double> x(n);
    for (long i = 0; i < n; ++i) x[i] = 0.5 + 0.3 * std::cos(kTwoPi * k * i / double(n) + 0.4);
    const Complex a = dft_bin(x, k);
    CHECK(std::abs(a - std::polar(0.3, 0.4)) < 1e-13);
    CHECK(dft_bin(x, 0).real() == doctest::Approx(0.5));
}

TEST_CASE("off-bin frequency is rejected under the exact policy") {
    Trace tr;
    tr.fs = 2000.0;
    tr.add_channel("v_d");
    tr.channel("v_d").assign(1000, 0.0);
    CHECK(bin_index(tr, 10.0) == 5);
    CHECK_THROWS_AS(bin_index(tr, 10.7), ConfigError);
    CHECK(bin_index(tr, 10.7, BinPolicy::Nearest) == 5);
}

TEST_CASE("two-injection admittance recovers the generating matrix") {
    Mat2c y;
    y << Complex{1.0, -2.0}, Complex{0.3, 0.1}, Complex{-0.2, 0.4}, Complex{0.8, 1.5};
    const auto [d, q] = testing::synthetic_runs(y, 12.5, 2000.0, 1600);
    const PhasorSample pd = extract_phasor(d.trace, 12.5), pq = extract_phasor(q.trace, 12.5);
    CHECK((admittance_two_injections(pd, pq) - y).norm() < 1e-12);
}

TEST_CASE("collinear injections are rejected") {
    PhasorSample a{10.0, 1.0, 0.5, 0.2, 0.1}, b{10.0, 2.0, 1.0, 0.4, 0.2};
    CHECK_THROWS_AS(admittance_two_injections(a, b), NumericalError);
}

TEST_CASE("direct single-axis column requires a clean drive") {
    PhasorSample s{10.0, 0.01, 1e-5, Complex{0.02, 0.01}, Complex{0.0, -0.03}};
    const Eigen::Vector2cd col = admittance_direct(s, Axis::D);
    CHECK(std::abs(col(0) - Complex{2.0, 1.0}) < 1e-12);
    s.v_q = 0.001;
    CHECK_THROWS(admittance_direct(s, Axis::D));
}

TEST_CASE("build table reports frequencies missing a partner axis") {
    Mat2c y = Mat2c::Identity();
    auto [d1, q1] = testing::synthetic_runs(y, 10.0, 2000.0, 2000);
    auto [d2, q2] = testing::synthetic_runs(y, 20.0, 2000.0, 1000);
    (void)q2;
    try {
        build_table({d1, q1, d2});
        FAIL("expected IncompleteData");
    } catch (const IncompleteData& e) {
        CHECK(std::string(e.what()).find("20") != std::string::npos);
    }
    const AdmittanceTable t = build_table({d1, q1, d2, q2});
    CHECK(t.size() == 2);
}

TEST_CASE("open-loop R-L branch sweep matches the closed form") {
    ExperimentConfig c;
    c.sweep.n_points = 8;
    c.sweep.f_min = 2.0;
    c.sweep.settle_min = 3.0;
    BenchModel m = c.bench();
    m.dut = DutKind::RLBranch;
    m.branch.source = {1.02, 0.15};
    const auto snap = settle(m, equilibrium_state(m), {c.steady, c.sweep.dt});
    const SweepResult res = run_sweep(snap, c.sweep);
    const AdmittanceTable t = build_table(res.runs);
    REQUIRE(t.size() == 8);
    const StateSpaceModel lin = linearize_branch(m.branch.r, m.branch.l);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Mat2c exact = rl_admittance(m.branch.r, m.branch.l, t.freqs[k]);
        CHECK(relative_frobenius(lin.response_hz(t.freqs[k]), exact) < 1e-9);
        CHECK(relative_frobenius(t.values[k], exact) < 1e-3);
    }
}

TEST_CASE("identical sweeps are reproducible") {
    ExperimentConfig c;
    c.sweep.n_points = 3;
    c.sweep.f_min = 20.0;
    c.sweep.noise = 1e-4;
    c.sweep.jobs = 2;
    const auto snap = settle(c.bench(), equilibrium_state(c.bench()), {c.steady, c.sweep.dt});
    const SweepResult a = run_sweep(snap, c.sweep);
    c.sweep.jobs = 1;
    const SweepResult b = run_sweep(snap, c.sweep);
    REQUIRE(a.runs.size() == 6);
    for (std::size_t k = 0; k < a.runs.size(); ++k) CHECK(a.runs[k].trace.channels == b.runs[k].trace.channels);
    c.sweep.seed = 2;
    const SweepResult other = run_sweep(snap, c.sweep);
    CHECK(other.runs[0].trace.channels != a.runs[0].trace.channels);
}

TEST_CASE("run store round trip") {
    ExperimentConfig c;
    c.sweep.n_points = 2;
    c.sweep.f_min = 50.0;
    const auto snap = settle(c.bench(), equilibrium_state(c.bench()), {c.steady, c.sweep.dt});
    const SweepResult res = run_sweep(snap, c.sweep);
    const auto dir = std::filesystem::temp_directory_path() / "ibrscan_store_test";
    std::filesystem::remove_all(dir);
    save_run_store(dir.string(), res);
    const auto back = load_run_store(dir.string());
    REQUIRE(back.size() == res.runs.size());
    const AdmittanceTable a = build_table(res.runs), b = build_table(back);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK((a.values[k] - b.values[k]).norm() == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("table csv round trip keeps metadata and exact values") {
    AdmittanceTable t;
    t.add(1.0, Mat2c::Identity() / 3.0);
    t.add(2.5, Mat2c::Constant(Complex{1e-9, -7.0}));
    t.metadata["kind"] = "series-voltage";
    std::stringstream ss;
    write_table_csv(ss, t);
    const AdmittanceTable back = read_table_csv(ss);
    CHECK(back.freqs == t.freqs);
    CHECK(back.metadata == t.metadata);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(back.values[k] == t.values[k]);
    CHECK_THROWS_AS(t.add(2.0, Mat2c::Identity()), ConfigError);
}

namespace {

const Snapshot<BenchModel>& plant_snapshot(double scr = std::numeric_limits<double>::infinity()) {
    static std::map<double, Snapshot<BenchModel>> cache;
    auto it = cache.find(scr);
    if (it == cache.end()) {
        ExperimentConfig c;
        c.grid.scr = scr;
        const BenchModel m = c.bench();
        it = cache.emplace(scr, settle(m, equilibrium_state(m), {c.steady, c.sweep.dt})).first;
    }
    return it->second;
}

PlannedFrequency single(double f, double fs = 2000.0) {
    return plan_frequencies(f, f, 1, fs, 10).entries.front();
}

}  // namespace

TEST_CASE("plan examples at 20 kHz") {
    const auto a = plan_frequencies(10.0, 10.0, 1, 20000.0, 10).entries.front();
    CHECK(a.n_samples == 20000);
    CHECK(a.freq_hz == 10.0);
    const auto b = plan_frequencies(7.3, 7.3, 1, 20000.0, 10).entries.front();
    CHECK(std::abs(b.freq_hz - 7.3) < 0.05);
    CHECK(b.freq_hz == doctest::Approx(b.k * 20000.0 / b.n_samples).epsilon(1e-14));
    CHECK_THROWS_AS(plan_frequencies(1.0, 200.0, 10, 300.0), ConfigError);
}

TEST_CASE("zero-magnitude injection replays the unperturbed snapshot") {
    SweepSpec spec;
    spec.magnitude = 0.0;
    const PlannedFrequency e = single(20.0);
    const RunResult r = execute_run(plant_snapshot(), e, Axis::D, spec);
    BenchModel m = plant_snapshot().model;
    SimState s = plant_snapshot().state;
    const double settle = std::max(spec.settle_cycles / e.freq_hz, spec.settle_min);
    const long samples = static_cast<long>(std::ceil(settle / (spec.dt * spec.decimation)));
    advance(m, s, spec.dt, samples * spec.decimation);
    const Trace playback = record(m, s, spec.dt, spec.decimation, static_cast<std::size_t>(e.n_samples));
    CHECK(r.trace.channels == playback.channels);
}

TEST_CASE("a 0.01 p.u. injection stands 40 dB above neighbouring bins") {
    SweepSpec spec;
    const PlannedFrequency e = single(10.0);
    const RunResult r = execute_run(plant_snapshot(), e, Axis::D, spec);
    CHECK(r.status == "ok");
    for (const char* name : {"v_d", "i_d"}) {
        const auto& x = r.trace.channel(name);
        const double line = std::abs(dft_bin(x, e.k));
        for (long k : {e.k - 2, e.k - 1, e.k + 1, e.k + 2}) CHECK(20.0 * std::log10(line / std::abs(dft_bin(x, k))) > 40.0);
    }
}

TEST_CASE("a 0.5 p.u. injection is flagged nonlinear") {
    SweepSpec spec;
    spec.magnitude = 0.5;
    const RunResult r = execute_run(plant_snapshot(), single(10.0), Axis::D, spec);
    CHECK(r.status == "nonlinear");
    CHECK(r.harmonic_ratio > kNonlinearRatio);
    CHECK(r.usable());
}

TEST_CASE("every run lies on an exact bin of its window") {
    SweepSpec spec;
    spec.n_points = 4;
    spec.f_min = 30.0;
    const SweepResult res = run_sweep(plant_snapshot(), spec);
    for (const auto& r : res.runs) {
        const double k = r.spec.freq_hz * double(r.trace.size()) / r.trace.fs;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
        CHECK_NOTHROW(bin_index(r.trace, r.spec.freq_hz));
    }
}

TEST_CASE("halving the magnitude changes the admittance by under 1 percent") {
    SweepSpec spec;
    spec.n_points = 5;
    const AdmittanceTable a = build_table(run_sweep(plant_snapshot(), spec).runs);
    spec.magnitude = 0.005;
    const AdmittanceTable b = build_table(run_sweep(plant_snapshot(), spec).runs);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(relative_frobenius(b.values[k], a.values[k]) < 0.01);
}

TEST_CASE("cosine and sine drives give the same admittance") {
    SweepSpec spec;
    const PlannedFrequency e = single(10.0);
    auto run = [&](double phase) {
        std::pair<RunResult, RunResult> p = execute_pair(plant_snapshot(), e, spec);
        BenchModel m = plant_snapshot().model;
        for (RunResult* r : {&p.first, &p.second}) {
            InjectionSpec inj = r->spec;
            inj.phase = phase;
            m.injection = inj;
            SimState s = plant_snapshot().state;
            const double settle = std::max(spec.settle_cycles / e.freq_hz, spec.settle_min);
            const long samples = static_cast<long>(std::ceil(settle / (spec.dt * spec.decimation)));
            advance(m, s, spec.dt, samples * spec.decimation);
            r->trace = record(m, s, spec.dt, spec.decimation, static_cast<std::size_t>(e.n_samples));
        }
        return admittance_two_injections(extract_phasor(p.first.trace, e.freq_hz), extract_phasor(p.second.trace, e.freq_hz));
    };
    CHECK(relative_frobenius(run(-kTwoPi / 4), run(0.0)) < 1e-4);
}

TEST_CASE("coherent cosine phasor and correction at identity") {
    Trace tr;
    tr.fs = 2000.0;
    for (const char* name : {"v_d", "v_q", "i_d", "i_q", "dtheta_filtered"}) tr.add_channel(name);
    for (int n = 0; n < 2000; ++n) {
        tr.channel("v_d").push_back(0.05 * std::cos(kTwoPi * 10.0 * n / tr.fs));
        tr.channel("v_q").push_back(0.0);
        tr.channel("i_d").push_back(0.02 * std::sin(kTwoPi * 10.0 * n / tr.fs));
        tr.channel("i_q").push_back(0.01);
        tr.channel("dtheta_filtered").push_back(0.0);
    }
    ExtractOptions on, off;
    off.correction = false;
    const PhasorSample a = extract_phasor(tr, 10.0, on), b = extract_phasor(tr, 10.0, off);
    CHECK(std::abs(a.v_d - Complex{0.05, 0.0}) < 1e-15);
    CHECK(std::abs(a.v_q) < 1e-15);
    CHECK(std::abs(a.i_q) < 1e-15);
    CHECK(a.v_d == b.v_d);
    CHECK(a.i_d == b.i_d);
}

TEST_CASE("identity voltage and diagonal current give a diagonal admittance") {
    const PhasorSample d{10.0, 1.0, 0.0, 2.0, 0.0}, q{10.0, 0.0, 1.0, 0.0, 3.0};
    Mat2c expect = Mat2c::Zero();
    expect(0, 0) = 2.0;
    expect(1, 1) = 3.0;
    CHECK((admittance_two_injections(d, q) - expect).norm() == 0.0);
}

TEST_CASE("synthetic R-L branch runs recover the closed form") {
    for (double f : {1.0, 25.0, 200.0}) {
        const Mat2c y = rl_admittance(0.0015, 0.15, f);
        const long n = static_cast<long>(std::lround(10 * 2000.0 / f));
        const auto [d, q] = testing::synthetic_runs(y, f, 2000.0, n);
        const AdmittanceTable t = build_table({d, q});
        CHECK(relative_frobenius(t.values[0], y) < 1e-9);
    }
}

TEST_CASE("direct admittance agrees with two injections on the plant") {
    SweepSpec spec;
    const PlannedFrequency e = single(10.0);
    const auto [d, q] = execute_pair(plant_snapshot(), e, spec);
    const PhasorSample pd = extract_phasor(d.trace, e.freq_hz), pq = extract_phasor(q.trace, e.freq_hz);
    const Mat2c y = admittance_two_injections(pd, pq);
    Mat2c direct;
    direct.col(0) = admittance_direct(pd, Axis::D);
    direct.col(1) = admittance_direct(pq, Axis::Q);
    CHECK(relative_frobenius(direct, y) < 0.01);

    const auto [dw, qw] = execute_pair(plant_snapshot(4.0), e, spec);
    (void)qw;
    CHECK_THROWS(admittance_direct(extract_phasor(dw.trace, e.freq_hz), Axis::D));
}

TEST_CASE("empty run list gives an empty table") { CHECK(build_table({}).empty()); }

TEST_CASE("corrected high-bandwidth estimate matches the low-bandwidth probe below the pll bandwidth") {
    ExperimentConfig c;
    c.sweep.n_points = 4;
    c.sweep.f_max = 7.0;
    const AdmittanceTable high = build_table(run_sweep(plant_snapshot(), c.sweep).runs);
    BenchModel m = c.bench();
    m.probe = MeasurementPllConfig::low_bandwidth(0.5);
    const auto snap = settle(m, equilibrium_state(m), {c.steady, c.sweep.dt});
    const AdmittanceTable low = build_table(run_sweep(snap, c.sweep).runs);
    REQUIRE(low.size() == high.size());
    for (std::size_t k = 0; k < low.size(); ++k) CHECK(relative_frobenius(high.values[k], low.values[k]) < 0.02);
}
