#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibrscan/analytic.hpp"
#include "ibrscan/cli.hpp"
#include "ibrscan/config.hpp"
#include "ibrscan/errors.hpp"

using namespace ibrscan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ibrscan_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& s) const { return (path / s).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string read(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ibrscan");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("config parses keys and rejects unknown or duplicate ones") {
    std::stringstream ok("# comment\nsweep.n_points = 5   # trailing\ngrid.scr = 2.5\nprobe.variant = low-bandwidth\n");
    const ExperimentConfig c = parse_config(ok);
    CHECK(c.sweep.n_points == 5);
    CHECK(c.grid.scr == 2.5);
    CHECK(c.probe.variant == PllVariant::LowBandwidth);

    std::stringstream unknown("sweep.points = 5\n");
    CHECK_THROWS_AS(parse_config(unknown), ConfigError);
    std::stringstream dup("grid.scr = 2\ngrid.scr = 3\n");
    CHECK_THROWS_AS(parse_config(dup), ConfigError);
    std::stringstream bad("sweep.f_min = one\n");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    std::stringstream mixed("grid.scr = 2\ngrid.l_g = 0.3\n");
    CHECK_THROWS_AS(parse_config(mixed), ConfigError);
    std::stringstream inverted("sweep.f_min = 100\nsweep.f_max = 10\n");
    CHECK_THROWS_AS(parse_config(inverted), ConfigError);
}

TEST_CASE("physical-unit magnitudes convert to per unit") {
    std::stringstream kv("sweep.magnitude_kv = 1.2\n");
    CHECK(parse_config(kv).sweep.magnitude == doctest::Approx(0.01));
    std::stringstream ka("sweep.magnitude_ka = 0.0096225\n");
    CHECK(parse_config(ka).sweep.magnitude == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("default config text parses back to the defaults") {
    std::stringstream ss(default_config_text());
    const ExperimentConfig c = parse_config(ss);
    const ExperimentConfig d;
    CHECK(c.sweep.n_points == d.sweep.n_points);
    CHECK(c.op.p_ref == d.op.p_ref);
    CHECK(c.stability.scr_step == d.stability.scr_step);
    CHECK(std::isinf(c.grid.scr));
}

TEST_CASE("cli exit codes for bad input") {
    TempDir dir("cli_bad");
    write(dir / "bad.cfg", "sweep.unknown = 1\n");
    CHECK(cli({"sweep", "--config", dir / "bad.cfg", "--out", dir / "o"}) == kExitConfig);
    CHECK(cli({"frobnicate"}) == kExitConfig);
    CHECK(cli({"validate", "--out", dir / "missing"}) == kExitConfig);
    write(dir / "model.txt", "ibrscan-rational-model 1\npoles 3\n");
    CHECK(cli({"stability", "--model", dir / "model.txt", "--out", dir / "s"}) != kExitOk);
    write(dir / "unstable.cfg", "grid.scr = 1.3\n");
    CHECK(cli({"sweep", "--config", dir / "unstable.cfg", "--out", dir / "u"}) != kExitOk);
}

TEST_CASE("zero requested frequencies give an empty manifest") {
    TempDir dir("cli_empty");
    write(dir / "c.cfg", "sweep.n_points = 0\n");
    CHECK(cli({"sweep", "--config", dir / "c.cfg", "--out", dir / "o"}) == kExitOk);
    CHECK(lines(read(dir / "o/manifest.csv")) == 1);
}

TEST_CASE("missing q-axis runs make extraction fail") {
    TempDir dir("cli_missing");
    write(dir / "c.cfg", "sweep.n_points = 2\nsweep.f_min = 40\n");
    REQUIRE(cli({"sweep", "--config", dir / "c.cfg", "--out", dir / "o"}) == kExitOk);
    const std::string manifest = read(dir / "o/manifest.csv");
    std::stringstream in(manifest), out;
    std::string line;
    while (std::getline(in, line))
        if (line.find(",q,") == std::string::npos || line.rfind("40,", 0) != 0) out << line << '\n';
    write(dir / "o/manifest.csv", out.str());
    CHECK(cli({"extract-fit", "--config", dir / "c.cfg", "--out", dir / "o"}) == kExitConfig);
}

TEST_CASE("pipeline outputs are byte-identical for identical config and seed") {
    TempDir dir("cli_repro");
    write(dir / "c.cfg", "sweep.n_points = 6\nsweep.f_min = 5\nsweep.noise = 1e-5\n");
    for (const char* out : {"a", "b"}) {
        REQUIRE(cli({"sweep", "--config", dir / "c.cfg", "--out", dir / out, "--jobs", "2"}) == kExitOk);
        REQUIRE(cli({"extract-fit", "--config", dir / "c.cfg", "--out", dir / out}) == kExitOk);
    }
    for (const char* f : {"manifest.csv", "plan.csv", "table.csv", "model.txt", "fit_report.csv",
                          "runs/run_000_d.csv", "runs/run_005_q.csv"})
        CHECK(read(dir / (std::string("a/") + f)) == read(dir / (std::string("b/") + f)));
}

TEST_CASE("validating the oracle against itself gives zero error") {
    TempDir dir("cli_oracle");
    const StateSpaceModel y = linearize_inverter(InverterParams{}, OperatingPoint{});
    save_table(dir / "table.csv", freq_response(y, {1.0, 10.0, 100.0}));
    CHECK(cli({"validate", "--out", dir.path.string()}) == kExitOk);
    const std::string v = read(dir / "validation.csv");
    CHECK(v.find("1,0,0,0,0,0,0,1") != std::string::npos);
}

TEST_CASE("default pipeline end to end") {
    TempDir dir("cli_default");
    const std::string out = dir / "o";
    REQUIRE(cli({"sweep", "--out", out}) == kExitOk);
    CHECK(lines(read(out + "/manifest.csv")) == 81);
    REQUIRE(cli({"extract-fit", "--out", out}) == kExitOk);
    CHECK(read(out + "/fit_report.csv").find(",1\n") != std::string::npos);
    CHECK(cli({"validate", "--out", out}) == kExitOk);
    CHECK(lines(read(out + "/oracle_eigenvalues.csv")) == 9);
    CHECK(cli({"stability", "--out", out, "--timedomain"}) == kExitOk);
    CHECK(lines(read(out + "/verdicts.csv")) == 29);
    CHECK(fs::exists(out + "/eigenvalues/eig_scr_4.00.csv"));
    CHECK(lines(read(out + "/timedomain.csv")) >= 3);

    write(dir / "off.cfg", "extract.correction = false\n");
    REQUIRE(cli({"extract-fit", "--config", dir / "off.cfg", "--runs", out, "--out", dir / "off"}) == kExitOk);
    CHECK(cli({"validate", "--config", dir / "off.cfg", "--out", dir / "off"}) == kExitValidation);
}

TEST_CASE("simulate writes a trace") {
    TempDir dir("cli_sim");
    write(dir / "c.cfg", "simulate.t_end = 1.5\nsimulate.inject = q\nsimulate.freq = 20\n");
    CHECK(cli({"simulate", "--config", dir / "c.cfg", "--out", dir.path.string()}) == kExitOk);
    const std::string tr = read(dir / "trace.csv");
    CHECK(tr.rfind("t,v_d,v_q,i_d,i_q", 0) == 0);
    CHECK(lines(tr) == 1 + 1501);
}

TEST_CASE("scr schedule parsing") {
    std::stringstream ok("simulate.t_end = 9\nsimulate.scr_schedule = 5:1.6, 7:1.4\n");
    const ExperimentConfig c = parse_config(ok);
    REQUIRE(c.simulate.scr_schedule.size() == 2);
    CHECK(c.simulate.scr_schedule[1] == std::pair<double, double>{7.0, 1.4});
    std::stringstream late("simulate.t_end = 2\nsimulate.scr_schedule = 5:1.6\n");
    CHECK_THROWS_AS(parse_config(late), ConfigError);
    std::stringstream bad("simulate.t_end = 9\nsimulate.scr_schedule = 5-1.6\n");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("single strong-grid stability point") {
    TempDir dir("cli_single");
    write(dir / "c.cfg", "stability.model = analytic\nstability.scr_min = 4\nstability.scr_max = 4\n");
    REQUIRE(cli({"stability", "--config", dir / "c.cfg", "--out", dir.path.string()}) == kExitOk);
    const std::string v = read(dir / "verdicts.csv");
    CHECK(lines(v) == 2);
    CHECK(v.find("\n4,6,1,") != std::string::npos);
}
