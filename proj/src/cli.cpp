#include "ibrscan/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ibrscan/analytic.hpp"
#include "ibrscan/config.hpp"
#include "ibrscan/errors.hpp"
#include "ibrscan/extract.hpp"
#include "ibrscan/stability.hpp"

namespace ibrscan {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out = "out";
    int jobs = 1;
    bool timedomain = false;
    std::string runs;   // run store directory (defaults to --out)
    std::string table;  // admittance table (defaults to OUT/table.csv)
    std::string model;  // rational model (defaults to OUT/model.txt)
};

class ValidationFailure : public Error {
   public:
    using Error::Error;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig c;
    if (!o.config.empty()) c = load_config(o.config);
    c.sweep.jobs = o.jobs;
    c.validate();
    return c;
}

std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

Snapshot<BenchModel> settle_bench(const ExperimentConfig& c) {
    const BenchModel m = c.bench();
    return settle(m, equilibrium_state(m), {c.steady, c.sweep.dt});
}

int cmd_sweep(const Options& o) {
    const ExperimentConfig c = load(o);
    SweepResult res;
    res.plan = plan_frequencies(c.sweep.f_min, c.sweep.f_max, c.sweep.n_points, c.sweep.fs(),
                                c.sweep.min_cycles);
    if (!c.sweep.coherent) res.plan = uncoherent_plan(res.plan);
    if (!res.plan.entries.empty()) res = run_sweep(settle_bench(c), c.sweep, res.plan);
    save_run_store(o.out, res);
    {
        auto os = open_out(fs::path(o.out) / "plan.csv");
        os << "freq_hz,target_hz,k,n_samples,near_grid_harmonic\n";
        for (const auto& e : res.plan.entries)
            os << fmt(e.freq_hz) << ',' << fmt(e.target_hz) << ',' << e.k << ',' << e.n_samples << ','
               << (e.near_grid_harmonic ? 1 : 0) << '\n';
    }
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    std::size_t diverged = 0;
    for (const auto& r : res.runs) diverged += !r.usable();
    std::cout << res.runs.size() << " runs written to " << o.out << '\n';
    if (diverged) {
        std::cerr << diverged << " run(s) diverged\n";
        return kExitRuntime;
    }
    return kExitOk;
}

void write_poles_csv(std::ostream& os, const RationalModel& m) {
    os << "re,im,freq_hz\n";
    for (const auto& p : m.poles) os << fmt(p.real()) << ',' << fmt(p.imag()) << ',' << fmt(std::abs(p) / kTwoPi) << '\n';
}

int cmd_extract_fit(const Options& o) {
    const ExperimentConfig c = load(o);
    const std::string store = o.runs.empty() ? o.out : o.runs;
    const auto runs = load_run_store(store);
    ExtractOptions eo;
    eo.correction = c.extract.correction;
    eo.cond_limit = c.extract.cond_limit;
    eo.bins = c.sweep.coherent ? BinPolicy::Exact : BinPolicy::Nearest;
    AdmittanceTable table = build_table(runs, eo);
    const fs::path out(o.out);
    fs::create_directories(out);
    save_table((out / "table.csv").string(), table);
    if (table.empty()) {
        std::cout << "empty table; nothing to fit\n";
        return kExitOk;
    }
    auto [model, report] = auto_order_fit(table, c.fit.rms_target, c.fit.max_poles, c.fit.options());
    save_model((out / "model.txt").string(), model);
    {
        auto os = open_out(out / "fit_report.csv");
        write_fit_report_csv(os, report);
    }
    {
        auto os = open_out(out / "poles.csv");
        write_poles_csv(os, model);
    }
    {
        AdmittanceTable fitted;
        for (double f : table.freqs) fitted.add(f, model.at_hz(f));
        save_table((out / "fit_response.csv").string(), fitted);
    }
    std::cout << "table: " << table.size() << " frequencies; fit order " << model.order()
              << ", rms " << model.fit_rms << '\n';
    for (const auto& n : report.notes) std::cerr << "note: " << n << '\n';
    for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
    if (report.underfit) std::cerr << "warning: fit is underfit (target not reached)\n";
    return kExitOk;
}

struct ElementErrors {
    double fro = 0.0, main = 0.0, qd = 0.0;
    double el[4] = {0, 0, 0, 0};
};

ElementErrors compare(const Mat2c& y, const Mat2c& ref) {
    ElementErrors e;
    e.fro = relative_frobenius(y, ref);
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
        e.el[k] = relative_element(y, ref, k / 2, k % 2);
        if (k != 2) s += e.el[k] * e.el[k];
    }
    e.main = std::sqrt(s);
    e.qd = std::abs(y(1, 0) - ref(1, 0)) / std::abs(ref(1, 0));
    return e;
}

int cmd_validate(const Options& o) {
    const ExperimentConfig c = load(o);
    const fs::path out(o.out);
    const std::string table_path = o.table.empty() ? (out / "table.csv").string() : o.table;
    const AdmittanceTable table = load_table(table_path);
    const StateSpaceModel oracle = linearize_inverter(c.inverter, c.op);
    const AdmittanceTable ref = freq_response(oracle, table.freqs);
    save_table((out / "oracle.csv").string(), ref);
    {
        auto os = open_out(out / "oracle_eigenvalues.csv");
        write_eigenvalues_csv(os, oracle.eigenvalues());
    }
    auto os = open_out(out / "validation.csv");
    os << "freq_hz,err_fro,err_dd,err_dq,err_qd,err_qq,err_qd_own,pass\n";
    double worst = 0.0, mean = 0.0;
    std::size_t failures = 0;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const ElementErrors e = compare(table.values[k], ref.values[k]);
        const bool pass = e.main <= c.validate_spec.tolerance && e.qd <= c.validate_spec.tolerance_qd;
        failures += !pass;
        worst = std::max(worst, e.fro);
        mean += e.fro / double(table.size());
        os << fmt(table.freqs[k]) << ',' << fmt(e.fro) << ',' << fmt(e.el[0]) << ',' << fmt(e.el[1])
           << ',' << fmt(e.el[2]) << ',' << fmt(e.el[3]) << ',' << fmt(e.qd) << ',' << (pass ? 1 : 0)
           << '\n';
    }
    std::cout << "validated " << table.size() << " frequencies: max error " << worst << ", mean "
              << mean << ", " << failures << " beyond tolerance\n";
    if (failures) throw ValidationFailure(std::to_string(failures) + " frequencies beyond tolerance");
    return kExitOk;
}

int cmd_stability(const Options& o) {
    const ExperimentConfig c = load(o);
    const fs::path out(o.out);
    StateSpaceModel y;
    if (c.stability.model == "analytic") {
        y = linearize_inverter(c.inverter, c.op);
    } else {
        const std::string path = o.model.empty() ? (out / "model.txt").string() : o.model;
        y = realize_state_space(load_model(path));
    }
    const auto grid = scr_grid(c.stability.scr_min, c.stability.scr_max, c.stability.scr_step);
    const auto verdicts = scr_sweep(y, grid, c.stability.x_over_r);
    {
        auto os = open_out(out / "verdicts.csv");
        write_verdicts_csv(os, verdicts);
    }
    for (const auto& v : verdicts) {
        char name[64];
        std::snprintf(name, sizeof name, "eig_scr_%.2f.csv", v.scr);
        auto os = open_out(out / "eigenvalues" / name);
        write_eigenvalues_csv(os, v.eigenvalues);
    }
    const auto boundary = stability_boundary(verdicts);
    if (boundary)
        std::cout << "stability boundary: unstable below SCR " << *boundary << '\n';
    else
        std::cout << "no stability boundary inside the SCR grid\n";

    if (o.timedomain) {
        ExperimentConfig ca = c;
        ca.grid = {};
        ca.grid.scr = c.stability.scr_a;
        ca.grid.x_over_r = c.stability.x_over_r;
        ca.sweep.kind = InjectionKind::SeriesVoltage;
        const auto snap = settle_bench(ca);
        std::vector<double> points;
        for (std::size_t k = 0; k < verdicts.size(); ++k) {
            const bool edge = (k > 0 && verdicts[k - 1].stable != verdicts[k].stable) ||
                              (k + 1 < verdicts.size() && verdicts[k + 1].stable != verdicts[k].stable);
            if (edge) points.push_back(verdicts[k].scr);
        }
        if (points.empty() && !verdicts.empty()) points.push_back(verdicts.front().scr);
        TimeDomainOptions td;
        td.dt = c.stability.dt;
        td.duration = c.stability.duration;
        td.kick = c.stability.kick;
        auto os = open_out(out / "timedomain.csv");
        os << "scr,x_over_r,diverged,growth_rate,t_end\n";
        for (double scr : points) {
            const auto r = timedomain_stability_probe(snap, scr, c.stability.x_over_r, td);
            os << fmt(scr) << ',' << fmt(c.stability.x_over_r) << ',' << (r.diverged ? 1 : 0) << ','
               << fmt(r.growth_rate) << ',' << fmt(r.t_end) << '\n';
            char name[64];
            std::snprintf(name, sizeof name, "envelope_scr_%.2f.csv", scr);
            auto es = open_out(out / "timedomain" / name);
            es << "t,deviation\n";
            for (std::size_t i = 0; i < r.t.size(); ++i) es << fmt(r.t[i]) << ',' << fmt(r.envelope[i]) << '\n';
            std::cout << "time domain SCR " << scr << ": " << (r.diverged ? "diverged" : "bounded")
                      << ", growth rate " << r.growth_rate << " 1/s\n";
        }
    }
    return kExitOk;
}

int cmd_simulate(const Options& o) {
    const ExperimentConfig c = load(o);
    BenchModel m = c.bench();
    SimState s = c.simulate.start == "cold" ? cold_state(m) : equilibrium_state(m);
    if (c.simulate.inject != "none") {
        InjectionSpec inj;
        inj.kind = c.sweep.kind;
        inj.axis = parse_axis(c.simulate.inject);
        inj.freq_hz = c.simulate.freq;
        inj.magnitude = c.simulate.magnitude;
        inj.t_start = c.probe.switch_release;
        inj.duration = std::max(c.simulate.t_end, 10.0 / inj.freq_hz);
        inj.validate();
        m.injection = inj;
    }
    const double t_sample = c.simulate.dt * c.simulate.decimation;
    auto samples_until = [&](double t) {
        return static_cast<std::size_t>(std::floor(t / t_sample + 1e-9));
    };
    Trace tr;
    std::size_t done = 0;
    auto append = [&](std::size_t n) {
        Trace part = record(m, s, c.simulate.dt, c.simulate.decimation, n);
        if (tr.names.empty()) {
            tr = std::move(part);
        } else {
            for (std::size_t ch = 0; ch < tr.channels.size(); ++ch)
                tr.channels[ch].insert(tr.channels[ch].end(), part.channels[ch].begin(), part.channels[ch].end());
        }
        done += n;
    };
    for (const auto& [t_switch, scr] : c.simulate.scr_schedule) {
        append(samples_until(t_switch) - done);
        m.grid = grid_for(scr_to_impedance(scr, c.grid.x_over_r), c.op);
    }
    append(samples_until(c.simulate.t_end) + 1 - done);
    auto os = open_out(fs::path(o.out) / "trace.csv");
    write_trace_csv(os, tr);
    std::cout << "wrote " << tr.size() << " samples to " << (fs::path(o.out) / "trace.csv").string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"ibrscan: dq admittance identification and weak-grid stability bench"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config file (key = value)");
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--jobs", o.jobs, "parallel simulation runs")->check(CLI::PositiveNumber);
    };
    auto* sweep = app.add_subcommand("sweep", "settle, plan and run the injection sweep");
    common(sweep);
    auto* xfit = app.add_subcommand("extract-fit", "admittance table and vector fit from a run store");
    common(xfit);
    xfit->add_option("--runs", o.runs, "run store directory (default: --out)");
    auto* val = app.add_subcommand("validate", "compare a table against the linearized oracle");
    common(val);
    val->add_option("--table", o.table, "table CSV (default: OUT/table.csv)");
    auto* stab = app.add_subcommand("stability", "SCR sweep of the closed inverter-grid loop");
    common(stab);
    stab->add_option("--model", o.model, "rational model file (default: OUT/model.txt)");
    stab->add_flag("--timedomain", o.timedomain, "simulate the points next to the boundary");
    auto* sim = app.add_subcommand("simulate", "plain time-domain run, trace CSV");
    common(sim);
    app.add_subcommand("print-config", "print every config key with its default")
        ->callback([] { std::cout << default_config_text(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    try {
        if (sweep->parsed()) return cmd_sweep(o);
        if (xfit->parsed()) return cmd_extract_fit(o);
        if (val->parsed()) return cmd_validate(o);
        if (stab->parsed()) return cmd_stability(o);
        if (sim->parsed()) return cmd_simulate(o);
        return kExitOk;
    } catch (const ValidationFailure& e) {
        std::cerr << "validation failed: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IncompleteData& e) {
        std::cerr << "incomplete data: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace ibrscan
