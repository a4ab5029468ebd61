#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ibrscan/errors.hpp"
#include "ibrscan/extract.hpp"
#include "support.hpp"

using namespace ibrscan;

namespace {

// Largest distance from a reference pole to its nearest fitted pole,
// relative to the reference pole's magnitude.
double pole_mismatch(const std::vector<Complex>& fitted, const std::vector<Complex>& ref) {
    double worst = 0.0;
    for (const Complex& p : ref) {
        double best = std::numeric_limits<double>::infinity();
        for (const Complex& q : fitted) best = std::min(best, std::abs(p - q));
        worst = std::max(worst, best / std::abs(p));
    }
    return worst;
}

}  // namespace

TEST_CASE("vector fitting recovers synthetic rational systems of orders 1 to 8") {
    const auto freqs = testing::log_freqs(0.05, 500.0, 120);
    for (int order = 1; order <= 8; ++order) {
        CAPTURE(order);
        const RationalModel gen = testing::random_model(order, 10u + unsigned(order));
        const AdmittanceTable t = testing::sample(gen, freqs);
        VfitOptions opt;
        opt.n_poles = order;
        opt.n_iterations = 40;
        opt.constant_term = false;
        const RationalModel fit = vector_fit(t, opt);
        CHECK(fit.order() == std::size_t(order));
        CHECK(pole_mismatch(fit.poles, gen.poles) < 1e-6);
        CHECK(fit_error(fit, t) < 1e-9);
    }
}

TEST_CASE("vector fitting recovers constant and proportional terms") {
    RationalModel gen = testing::random_model(4, 3);
    gen.D << 0.5, -0.1, 0.2, 0.7;
    gen.E << 1e-3, 0.0, 0.0, 2e-3;
    const AdmittanceTable t = testing::sample(gen, testing::log_freqs(0.1, 300.0, 80));
    VfitOptions opt;
    opt.n_poles = 4;
    opt.proportional_term = true;
    const RationalModel fit = vector_fit(t, opt);
    CHECK((fit.D - gen.D).norm() < 1e-8);
    CHECK((fit.E - gen.E).norm() < 1e-10);
    CHECK(pole_mismatch(fit.poles, gen.poles) < 1e-6);
}

TEST_CASE("fitted poles are stable and conjugate-paired") {
    const RationalModel gen = testing::random_model(6, 99);
    AdmittanceTable t = testing::sample(gen, testing::log_freqs(0.1, 300.0, 60));
    for (auto& y : t.values) y *= Complex{1.0, 0.0};
    VfitOptions opt;
    opt.n_poles = 8;
    const RationalModel fit = vector_fit(t, opt);
    for (std::size_t k = 0; k < fit.poles.size(); ++k) {
        CHECK(fit.poles[k].real() < 0.0);
        if (fit.poles[k].imag() > 0.0) {
            REQUIRE(k + 1 < fit.poles.size());
            CHECK(fit.poles[k + 1] == std::conj(fit.poles[k]));
            CHECK((fit.residues[k + 1] - fit.residues[k].conjugate()).norm() == 0.0);
        }
    }
}

TEST_CASE("too few frequencies for the requested order") {
    const RationalModel gen = testing::random_model(2, 1);
    const AdmittanceTable t = testing::sample(gen, testing::log_freqs(1.0, 100.0, 3));
    VfitOptions opt;
    opt.n_poles = 8;
    CHECK_THROWS_AS(vector_fit(t, opt), ConfigError);
}

TEST_CASE("auto order stops at the first order that meets the target") {
    const RationalModel gen = testing::random_model(4, 5);
    const AdmittanceTable t = testing::sample(gen, testing::log_freqs(0.1, 300.0, 60));
    VfitOptions base;
    base.constant_term = false;
    const auto [fit, report] = auto_order_fit(t, 1e-6, 12, base);
    CHECK(report.selected_order == 4);
    CHECK_FALSE(report.underfit);
    CHECK(report.orders == std::vector<int>{2, 4});
    CHECK(report.rms[0] > 1e-6);
    const auto [small, under] = auto_order_fit(t, 1e-6, 2, base);
    CHECK(under.underfit);
    CHECK(small.order() == 2);
}

TEST_CASE("state-space realization reproduces the rational model") {
    RationalModel gen = testing::random_model(5, 7);
    gen.D << 0.1, 0.0, 0.3, -0.2;
    // A rank-one residue needs a single state per pole.
    gen.residues[0] = (Eigen::Vector2cd(1.0, 2.0) * Eigen::RowVector2cd(0.5, -1.0)).eval();
    const StateSpaceModel ss = realize_state_space(gen);
    CHECK(ss.n_states() == 1 + 2 * 2 * 2);
    for (double f : {0.1, 1.0, 13.0, 170.0})
        CHECK(relative_frobenius(ss.response_hz(f), gen.at_hz(f)) < 1e-12);
    Eigen::VectorXcd eig = ss.eigenvalues();
    for (const Complex& p : gen.poles) {
        double best = 1e300;
        for (Eigen::Index k = 0; k < eig.size(); ++k) best = std::min(best, std::abs(eig(k) - p));
        CHECK(best < 1e-9 * std::abs(p));
    }
    RationalModel with_e = gen;
    with_e.E(0, 0) = 1.0;
    CHECK_THROWS_AS(realize_state_space(with_e), ConfigError);
}

TEST_CASE("model file round trip and malformed input") {
    RationalModel gen = testing::random_model(3, 11);
    gen.D(1, 0) = 0.25;
    gen.fit_rms = 1.5e-4;
    std::stringstream ss;
    write_model(ss, gen);
    const RationalModel back = read_model(ss);
    CHECK(back.poles == gen.poles);
    for (std::size_t k = 0; k < gen.order(); ++k) CHECK(back.residues[k] == gen.residues[k]);
    CHECK(back.D == gen.D);
    CHECK(back.fit_rms == gen.fit_rms);

    std::stringstream bad("ibrscan-rational-model 1\npoles 2\npole -1 0\n");
    CHECK_THROWS_AS(read_model(bad), ConfigError);
    std::stringstream wrong("hello\n");
    CHECK_THROWS_AS(read_model(wrong), ConfigError);
}

TEST_CASE("synthetic run store through extraction and fitting recovers the generator") {
    const RationalModel gen = testing::random_model(4, 21);
    const SweepPlan plan = plan_frequencies(0.5, 200.0, 30, 2000.0, 10);
    std::vector<RunResult> runs;
    for (const auto& e : plan.entries) {
        auto [d, q] = testing::synthetic_runs(gen.at_hz(e.freq_hz), e.freq_hz, plan.fs, e.n_samples);
        runs.push_back(d);
        runs.push_back(q);
    }
    const AdmittanceTable t = build_table(runs);
    VfitOptions base;
    base.constant_term = false;
    const auto [fit, report] = auto_order_fit(t, 1e-8, 8, base);
    CHECK(report.selected_order == 4);
    CHECK(pole_mismatch(fit.poles, gen.poles) < 1e-6);
}

TEST_CASE("first-order scalar system") {
    RationalModel gen;
    gen.poles = {Complex{-5.0, 0.0}};
    gen.residues = {Mat2c::Identity() * 10.0};
    const AdmittanceTable t = testing::sample(gen, testing::log_freqs(0.01, 100.0, 20));
    VfitOptions opt;
    opt.n_poles = 1;
    opt.constant_term = false;
    const RationalModel fit = vector_fit(t, opt);
    REQUIRE(fit.order() == 1);
    CHECK(std::abs(fit.poles[0] - Complex{-5.0, 0.0}) < 1e-8);
    CHECK((fit.residues[0] - gen.residues[0]).norm() < 1e-7);
    CHECK(fit.fit_rms < 1e-8);
}

TEST_CASE("constant data is carried by the constant term") {
    Mat2c c;
    c << 0.4, -0.1, 0.2, 0.3;
    AdmittanceTable t;
    for (double f : testing::log_freqs(1.0, 200.0, 20)) t.add(f, c);
    VfitOptions opt;
    opt.n_poles = 2;
    const RationalModel fit = vector_fit(t, opt);
    CHECK((fit.D.cast<Complex>() - c).norm() < 1e-10);
    for (std::size_t k = 0; k < fit.order(); ++k) CHECK(fit.residues[k].norm() < 1e-8 * std::abs(fit.poles[k]));
    CHECK(fit.fit_rms < 1e-10);
}

TEST_CASE("auto order on a six-pole system and trivial targets") {
    const RationalModel gen = testing::random_model(6, 8);
    const AdmittanceTable t = testing::sample(gen, testing::log_freqs(0.05, 500.0, 100));
    VfitOptions base;
    base.constant_term = false;
    CHECK(auto_order_fit(t, 1e-6, 12, base).second.selected_order == 6);
    const auto any = auto_order_fit(t, std::numeric_limits<double>::infinity(), 12, base);
    CHECK(any.second.selected_order == 2);
    CHECK(any.second.orders.size() == 1);
    CHECK(auto_order_fit(t, 1e-6, 4, base).second.underfit);
}

TEST_CASE("realization of single poles") {
    RationalModel real;
    real.poles = {Complex{-5.0, 0.0}};
    real.residues = {(Eigen::Vector2cd(1.0, 2.0) * Eigen::RowVector2cd(3.0, 1.0)).eval()};
    const StateSpaceModel a = realize_state_space(real);
    REQUIRE(a.n_states() == 1);
    CHECK(a.A(0, 0) == -5.0);

    RationalModel pair;
    const Complex p{-10.0, 100.0};
    const Mat2c r = (Eigen::Vector2cd(Complex{1.0, 0.5}, 2.0) * Eigen::RowVector2cd(1.0, Complex{0.0, 1.0})).eval();
    pair.poles = {p, std::conj(p)};
    pair.residues = {r, r.conjugate()};
    const StateSpaceModel b = realize_state_space(pair);
    REQUIRE(b.n_states() == 2);
    const Eigen::VectorXcd eig = b.eigenvalues();
    CHECK(std::min(std::abs(eig(0) - p), std::abs(eig(1) - p)) < 1e-12);
    CHECK(std::min(std::abs(eig(0) - std::conj(p)), std::abs(eig(1) - std::conj(p))) < 1e-12);
}

TEST_CASE("realized plant fit reproduces the model at every table frequency") {
    const RationalModel gen = testing::random_model(7, 4);
    const auto freqs = testing::log_freqs(1.0, 200.0, 40);
    VfitOptions opt;
    opt.n_poles = 7;
    const RationalModel fit = vector_fit(testing::sample(gen, freqs), opt);
    const StateSpaceModel ss = realize_state_space(fit);
    double worst = 0.0;
    for (double f : freqs) worst = std::max(worst, (ss.response_hz(f) - fit.at_hz(f)).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-10);
}

TEST_CASE("initial poles span the fitting band") {
    const auto p = initial_poles(1.0, 200.0, 6);
    REQUIRE(p.size() == 6);
    CHECK(p[0].imag() == doctest::Approx(kTwoPi * 1.0));
    CHECK(p[4].imag() == doctest::Approx(kTwoPi * 200.0));
    for (const auto& q : p) CHECK(q.real() == doctest::Approx(-std::abs(q.imag()) / 100.0));
    const auto odd = initial_poles(1.0, 200.0, 3);
    CHECK(std::count_if(odd.begin(), odd.end(), [](Complex q) { return q.imag() == 0.0; }) == 1);
}
