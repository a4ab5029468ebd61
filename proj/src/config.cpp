#include "ibrscan/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ibrscan/errors.hpp"
#include "ibrscan/stability.hpp"
#include "ibrscan/table.hpp"

namespace ibrscan {

GridImpedance GridSpec::impedance() const {
    if (by_impedance) return {r_g, l_g};
    return scr_to_impedance(scr, x_over_r);
}

MeasurementPllConfig ProbeSpec::pll() const {
    MeasurementPllConfig c = variant == PllVariant::LowBandwidth
                                 ? MeasurementPllConfig::low_bandwidth(bandwidth)
                                 : MeasurementPllConfig::high_bandwidth();
    if (variant == PllVariant::HighBandwidth) {
        c.kp = kp;
        c.ki = ki;
    }
    c.hpf_corner = hpf_corner;
    c.switch_release = switch_release;
    return c;
}

VfitOptions FitSpec::options() const {
    VfitOptions o;
    o.n_iterations = iterations;
    o.constant_term = constant_term;
    o.weighting = weighting;
    return o;
}

void ExperimentConfig::validate() const {
    inverter.validate();
    if (!(op.v_t > 0.0)) throw ConfigError("op.v_t must be positive");
    if (grid.by_impedance) {
        if (grid.r_g < 0.0 || grid.l_g < 0.0) throw ConfigError("grid.r_g and grid.l_g must be >= 0");
    } else if (!(grid.scr > 0.0) || !(grid.x_over_r > 0.0)) {
        throw ConfigError("grid.scr and grid.x_over_r must be positive");
    }
    sweep.validate();
    if (sweep.n_points > 0) probe.pll().validate(sweep.f_min);
    if (probe.switch_release < 0.0) throw ConfigError("probe.switch_release must be >= 0");
    if (!(fit.rms_target > 0.0) || fit.max_poles < 1 || fit.iterations < 1)
        throw ConfigError("fit settings out of range");
    scr_grid(stability.scr_min, stability.scr_max, stability.scr_step);
    if (!(stability.x_over_r > 0.0) || !(stability.scr_a > 0.0))
        throw ConfigError("stability.x_over_r and stability.scr_a must be positive");
    if (stability.model != "fitted" && stability.model != "analytic")
        throw ConfigError("stability.model must be 'fitted' or 'analytic'");
    if (!(stability.dt > 0.0) || stability.duration < 5.0)
        throw ConfigError("stability.dt must be positive and stability.duration >= 5 s");
    if (!(validate_spec.tolerance > 0.0) || !(validate_spec.tolerance_qd > 0.0))
        throw ConfigError("validate tolerances must be positive");
    if (!(steady.window > 0.0) || !(steady.tol > 0.0) || !(steady.max_duration > 0.0))
        throw ConfigError("steady settings must be positive");
    if (!(simulate.t_end > 0.0) || !(simulate.dt > 0.0) || simulate.decimation < 1)
        throw ConfigError("simulate settings out of range");
    if (simulate.start != "equilibrium" && simulate.start != "cold")
        throw ConfigError("simulate.start must be 'equilibrium' or 'cold'");
    if (simulate.inject != "none") parse_axis(simulate.inject);
    double last = 0.0;
    for (const auto& [t, scr] : simulate.scr_schedule) {
        if (!(t > last) || !(t < simulate.t_end))
            throw ConfigError("simulate.scr_schedule times must increase inside (0, t_end)");
        if (!(scr > 0.0)) throw ConfigError("simulate.scr_schedule SCR values must be positive");
        last = t;
    }
    if (!simulate.scr_schedule.empty() && grid.by_impedance)
        throw ConfigError("simulate.scr_schedule needs the grid given by grid.scr");
}

BenchModel ExperimentConfig::bench() const {
    BenchModel m;
    m.inverter = inverter;
    m.op = op;
    GridImpedance z = grid.impedance();
    // A current source needs something to push against.
    if (sweep.kind == InjectionKind::ShuntCurrent && z.r_g == 0.0 && z.l_g == 0.0) z = kStiffBus;
    m.grid = grid_for(z, op);
    m.probe = probe.pll();
    return m;
}

namespace {

double parse_number(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(key + ": '" + v + "' is not a number");
    return x;
}

int parse_int(const std::string& key, const std::string& v) {
    const double x = parse_number(key, v);
    if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(key + ": '" + v + "' is not an integer");
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Entry {
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

std::vector<Entry> entries(ExperimentConfig& c, bool& p_ref_set, bool& q_ref_set) {
    std::vector<Entry> e;
    auto num = [&e](std::string key, double& field) {
        e.push_back({key, [key, f = &field](const std::string& v) { *f = parse_number(key, v); },
                     [f = &field] { return fmt(*f); }});
    };
    auto integer = [&e](std::string key, int& field) {
        e.push_back({key, [key, f = &field](const std::string& v) { *f = parse_int(key, v); },
                     [f = &field] { return std::to_string(*f); }});
    };
    auto boolean = [&e](std::string key, bool& field) {
        e.push_back({key, [key, f = &field](const std::string& v) { *f = parse_bool(key, v); },
                     [f = &field] { return std::string(*f ? "true" : "false"); }});
    };
    auto word = [&e](std::string key, std::string& field) {
        e.push_back({key, [f = &field](const std::string& v) { *f = v; }, [f = &field] { return *f; }});
    };

    auto& inv = c.inverter;
    num("inverter.f", inv.f_nom);
    num("inverter.s_base", inv.s_base_mva);
    num("inverter.v_base", inv.v_base_kv);
    num("inverter.L", inv.L);
    num("inverter.R_L", inv.R_L);
    num("inverter.kp_i", inv.kp_i);
    num("inverter.ki_i", inv.ki_i);
    num("inverter.kp_pll", inv.kp_pll);
    num("inverter.ki_pll", inv.ki_pll);
    num("inverter.kp_p", inv.kp_p);
    num("inverter.ki_p", inv.ki_p);
    num("inverter.kp_q", inv.kp_q);
    num("inverter.ki_q", inv.ki_q);
    num("inverter.k_droop", inv.k_droop);

    num("op.v_t", c.op.v_t);
    num("op.p", c.op.p);
    num("op.q", c.op.q);
    ExperimentConfig* cfg = &c;
    bool* p_set = &p_ref_set;
    bool* q_set = &q_ref_set;
    e.push_back({"op.p_ref",
                 [cfg, p_set](const std::string& v) {
                     cfg->op.p_ref = parse_number("op.p_ref", v);
                     *p_set = true;
                 },
                 [cfg] { return fmt(cfg->op.p_ref); }});
    e.push_back({"op.q_ref",
                 [cfg, q_set](const std::string& v) {
                     cfg->op.q_ref = parse_number("op.q_ref", v);
                     *q_set = true;
                 },
                 [cfg] { return fmt(cfg->op.q_ref); }});

    num("grid.scr", c.grid.scr);
    num("grid.x_over_r", c.grid.x_over_r);
    for (const char* name : {"grid.r_g", "grid.l_g"}) {
        double* f = std::string(name) == "grid.r_g" ? &c.grid.r_g : &c.grid.l_g;
        e.push_back({name,
                     [cfg, f, name](const std::string& v) {
                         *f = parse_number(name, v);
                         cfg->grid.by_impedance = true;
                     },
                     [f] { return fmt(*f); }});
    }

    auto& sw = c.sweep;
    num("sweep.f_min", sw.f_min);
    num("sweep.f_max", sw.f_max);
    integer("sweep.n_points", sw.n_points);
    num("sweep.magnitude", sw.magnitude);
    e.push_back({"sweep.magnitude_kv",
                 [cfg](const std::string& v) {
                     cfg->sweep.magnitude = parse_number("sweep.magnitude_kv", v) / cfg->inverter.v_base_kv;
                 },
                 [cfg] { return fmt(cfg->sweep.magnitude * cfg->inverter.v_base_kv); }});
    e.push_back({"sweep.magnitude_ka",
                 [cfg](const std::string& v) {
                     cfg->sweep.magnitude = parse_number("sweep.magnitude_ka", v) / cfg->inverter.i_base_ka();
                 },
                 [cfg] { return fmt(cfg->sweep.magnitude * cfg->inverter.i_base_ka()); }});
    e.push_back({"sweep.kind", [cfg](const std::string& v) { cfg->sweep.kind = parse_injection_kind(v); },
                 [cfg] { return to_string(cfg->sweep.kind); }});
    integer("sweep.min_cycles", sw.min_cycles);
    num("sweep.dt", sw.dt);
    integer("sweep.decimation", sw.decimation);
    num("sweep.settle_min", sw.settle_min);
    integer("sweep.settle_cycles", sw.settle_cycles);
    num("sweep.noise", sw.noise);
    e.push_back({"sweep.seed",
                 [cfg](const std::string& v) {
                     cfg->sweep.seed = static_cast<std::uint64_t>(parse_int("sweep.seed", v));
                 },
                 [cfg] { return std::to_string(cfg->sweep.seed); }});
    boolean("sweep.coherent", sw.coherent);

    e.push_back({"probe.variant", [cfg](const std::string& v) { cfg->probe.variant = parse_pll_variant(v); },
                 [cfg] { return to_string(cfg->probe.variant); }});
    num("probe.bandwidth", c.probe.bandwidth);
    num("probe.hpf_corner", c.probe.hpf_corner);
    num("probe.switch_release", c.probe.switch_release);
    num("probe.kp", c.probe.kp);
    num("probe.ki", c.probe.ki);

    boolean("extract.correction", c.extract.correction);
    num("extract.cond_limit", c.extract.cond_limit);

    num("fit.rms_target", c.fit.rms_target);
    integer("fit.max_poles", c.fit.max_poles);
    integer("fit.iterations", c.fit.iterations);
    boolean("fit.constant_term", c.fit.constant_term);
    e.push_back({"fit.weighting",
                 [cfg](const std::string& v) {
                     if (v == "uniform")
                         cfg->fit.weighting = Weighting::Uniform;
                     else if (v == "inverse-magnitude")
                         cfg->fit.weighting = Weighting::InverseMagnitude;
                     else
                         throw ConfigError("fit.weighting: expected uniform or inverse-magnitude");
                 },
                 [cfg] {
                     return std::string(cfg->fit.weighting == Weighting::Uniform ? "uniform"
                                                                                 : "inverse-magnitude");
                 }});

    num("stability.scr_min", c.stability.scr_min);
    num("stability.scr_max", c.stability.scr_max);
    num("stability.scr_step", c.stability.scr_step);
    num("stability.x_over_r", c.stability.x_over_r);
    num("stability.scr_a", c.stability.scr_a);
    word("stability.model", c.stability.model);
    num("stability.dt", c.stability.dt);
    num("stability.duration", c.stability.duration);
    num("stability.kick", c.stability.kick);

    num("validate.tolerance", c.validate_spec.tolerance);
    num("validate.tolerance_qd", c.validate_spec.tolerance_qd);

    num("steady.window", c.steady.window);
    num("steady.tol", c.steady.tol);
    num("steady.max_duration", c.steady.max_duration);

    num("simulate.t_end", c.simulate.t_end);
    num("simulate.dt", c.simulate.dt);
    integer("simulate.decimation", c.simulate.decimation);
    word("simulate.start", c.simulate.start);
    word("simulate.inject", c.simulate.inject);
    num("simulate.freq", c.simulate.freq);
    num("simulate.magnitude", c.simulate.magnitude);
    e.push_back({"simulate.scr_schedule",
                 [cfg](const std::string& v) {
                     auto& out = cfg->simulate.scr_schedule;
                     out.clear();
                     std::stringstream ss(v);
                     std::string item;
                     while (std::getline(ss, item, ',')) {
                         const auto colon = item.find(':');
                         if (colon == std::string::npos)
                             throw ConfigError("simulate.scr_schedule: expected time:scr, got '" + item + "'");
                         out.emplace_back(parse_number("simulate.scr_schedule", trim(item.substr(0, colon))),
                                          parse_number("simulate.scr_schedule", trim(item.substr(colon + 1))));
                     }
                 },
                 [cfg] {
                     std::string s;
                     for (const auto& [t, scr] : cfg->simulate.scr_schedule)
                         s += (s.empty() ? "" : ", ") + fmt(t) + ":" + fmt(scr);
                     return s;
                 }});
    return e;
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c;
    bool p_ref_set = false, q_ref_set = false;
    const auto table = entries(c, p_ref_set, q_ref_set);
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const Entry* hit = nullptr;
        for (const auto& en : table)
            if (en.key == key) hit = &en;
        if (!hit) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        hit->set(value);
    }
    if (seen.count("grid.scr") && c.grid.by_impedance)
        throw ConfigError("give the grid either as scr/x_over_r or as r_g/l_g, not both");
    if (!p_ref_set) c.op.p_ref = c.op.p;
    if (!q_ref_set) c.op.q_ref = c.op.q;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    return parse_config(is);
}

std::string default_config_text() {
    ExperimentConfig c;
    bool a = false, b = false;
    std::ostringstream os;
    for (const auto& e : entries(c, a, b)) {
        if (e.key == "grid.r_g" || e.key == "grid.l_g" || e.key == "sweep.magnitude_kv" ||
            e.key == "sweep.magnitude_ka")
            continue;
        const std::string v = e.get();
        if (v.empty())
            os << "# " << e.key << " =\n";
        else
            os << e.key << " = " << v << '\n';
    }
    return os.str();
}

}  // namespace ibrscan
