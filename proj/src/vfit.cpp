#include "ibrscan/vfit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ibrscan/errors.hpp"

namespace ibrscan {

Mat2c RationalModel::eval(Complex s) const {
    Mat2c y = (D + s.real() * E).cast<Complex>();
    y += Complex{0.0, s.imag()} * E.cast<Complex>();
    for (std::size_t k = 0; k < poles.size(); ++k) y += residues[k] / (s - poles[k]);
    return y;
}

void RationalModel::validate() const {
    if (poles.size() != residues.size()) throw ConfigError("model: pole/residue count mismatch");
    for (std::size_t k = 0; k < poles.size(); ++k) {
        if (!std::isfinite(poles[k].real()) || !std::isfinite(poles[k].imag()) ||
            !residues[k].allFinite())
            throw ConfigError("model: non-finite pole or residue");
        if (poles[k].imag() == 0.0) {
            if (residues[k].imag().cwiseAbs().maxCoeff() > 0.0)
                throw ConfigError("model: real pole with complex residue");
            continue;
        }
        if (poles[k].imag() < 0.0 || k + 1 >= poles.size() || poles[k + 1] != std::conj(poles[k]) ||
            !residues[k + 1].isApprox(residues[k].conjugate(), 0.0))
            throw ConfigError("model: poles and residues must come in adjacent conjugate pairs");
        ++k;
    }
    if (!D.allFinite() || !E.allFinite()) throw ConfigError("model: non-finite D or E");
}

namespace {

// Real basis: a real pole gives 1/(s-p); a pair gives 1/(s-p)+1/(s-p*) and
// j/(s-p)-j/(s-p*).
Eigen::RowVectorXcd basis(const std::vector<Complex>& poles, Complex s) {
    Eigen::RowVectorXcd phi(static_cast<Eigen::Index>(poles.size()));
    for (std::size_t k = 0; k < poles.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        if (poles[k].imag() == 0.0) {
            phi(i) = 1.0 / (s - poles[k]);
        } else {
            const Complex a = 1.0 / (s - poles[k]), b = 1.0 / (s - std::conj(poles[k]));
            phi(i) = a + b;
            phi(i + 1) = Complex{0.0, 1.0} * (a - b);
            ++k;
        }
    }
    return phi;
}

Complex coeff_to_residue(const Eigen::VectorXd& c, std::size_t k, bool first_of_pair) {
    const auto i = static_cast<Eigen::Index>(k);
    return first_of_pair ? Complex{c(i), c(i + 1)} : Complex{c(i - 1), -c(i)};
}

// Sorted, conjugate-paired, stable pole list from raw eigenvalues.
std::vector<Complex> tidy_poles(const Eigen::VectorXcd& raw) {
    std::vector<Complex> reals, uppers;
    for (const auto& l : raw) {
        const double tol = 1e-10 * std::max(1.0, std::abs(l));
        Complex p = l;
        if (p.real() > 0.0) p = {-p.real(), p.imag()};
        if (std::abs(p.imag()) <= tol)
            reals.push_back({p.real(), 0.0});
        else if (p.imag() > 0.0)
            uppers.push_back(p);
    }
    std::vector<Complex> out;
    std::sort(reals.begin(), reals.end(), [](Complex a, Complex b) { return a.real() > b.real(); });
    std::sort(uppers.begin(), uppers.end(),
              [](Complex a, Complex b) { return std::abs(a) < std::abs(b); });
    for (auto p : reals) out.push_back(p);
    for (auto p : uppers) {
        out.push_back(p);
        out.push_back(std::conj(p));
    }
    return out;
}

double pole_change(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& p : b) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : a) best = std::min(best, std::abs(p - q) / std::max(1.0, std::abs(p)));
        worst = std::max(worst, best);
    }
    return worst;
}

std::vector<double> element_weights(const AdmittanceTable& t, int m, Weighting w) {
    std::vector<double> out(t.size(), 1.0);
    if (w == Weighting::Uniform) return out;
    double scale = 0.0;
    for (const auto& y : t.values) scale = std::max(scale, y.norm());
    for (std::size_t k = 0; k < t.size(); ++k)
        out[k] = 1.0 / std::max(std::abs(t.values[k](m / 2, m % 2)), 1e-12 * scale);
    return out;
}

// Least squares with unit-norm column scaling.
Eigen::VectorXd scaled_solve(Mat a, const Eigen::VectorXd& b, bool require_full_rank) {
    Eigen::VectorXd scale(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double n = a.col(j).norm();
        scale(j) = n > 0.0 ? 1.0 / n : 1.0;
        a.col(j) *= scale(j);
    }
    Eigen::VectorXd x;
    if (require_full_rank) {
        Eigen::ColPivHouseholderQR<Mat> qr(a);
        qr.setThreshold(1e-13);
        if (qr.rank() < a.cols())
            throw NumericalError("rank-deficient residue least squares (rank " +
                                 std::to_string(qr.rank()) + " of " + std::to_string(a.cols()) +
                                 "); try fewer poles");
        x = qr.solve(b);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
        x = cod.solve(b);
    }
    return x.cwiseProduct(scale);
}

struct PoleStep {
    std::vector<Complex> poles;
};

PoleStep relocate(const AdmittanceTable& t, const std::vector<Complex>& poles,
                  const VfitOptions& opt) {
    const auto n = static_cast<Eigen::Index>(poles.size());
    const auto K = static_cast<Eigen::Index>(t.size());
    const Eigen::Index per = n + (opt.constant_term ? 1 : 0) + (opt.proportional_term ? 1 : 0);

    std::vector<Eigen::RowVectorXcd> phi;
    std::vector<Complex> s;
    for (double f : t.freqs) {
        s.push_back({0.0, kTwoPi * f});
        phi.push_back(basis(poles, s.back()));
    }

    auto solve = [&](bool relaxed) -> std::pair<Eigen::VectorXd, double> {
        const Eigen::Index n_sigma = n + (relaxed ? 1 : 0);
        const Eigen::Index cols = 4 * per + n_sigma;
        const Eigen::Index rows = 8 * K + (relaxed ? 1 : 0);
        Mat a = Mat::Zero(rows, cols);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
        double h_norm = 0.0;
        for (int m = 0; m < 4; ++m) {
            const auto w = element_weights(t, m, opt.weighting);
            for (Eigen::Index k = 0; k < K; ++k) {
                const Complex h = t.values[static_cast<std::size_t>(k)](m / 2, m % 2);
                const double wk = w[static_cast<std::size_t>(k)];
                h_norm += std::norm(wk * h);
                Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(cols);
                row.segment(m * per, n) = wk * phi[static_cast<std::size_t>(k)];
                Eigen::Index c = m * per + n;
                if (opt.constant_term) row(c++) = wk;
                if (opt.proportional_term) row(c++) = wk * s[static_cast<std::size_t>(k)];
                row.segment(4 * per, n) = -wk * h * phi[static_cast<std::size_t>(k)];
                if (relaxed) row(4 * per + n) = -wk * h;
                const Eigen::Index r = 2 * (m * K + k);
                a.row(r) = row.real();
                a.row(r + 1) = row.imag();
                if (!relaxed) {
                    b(r) = (wk * h).real();
                    b(r + 1) = (wk * h).imag();
                }
            }
        }
        if (relaxed) {
            const double scale = std::sqrt(h_norm) / double(K);
            Eigen::RowVectorXcd sum = Eigen::RowVectorXcd::Zero(n + 1);
            for (Eigen::Index k = 0; k < K; ++k) {
                sum.head(n) += phi[static_cast<std::size_t>(k)];
                sum(n) += 1.0;
            }
            a.row(rows - 1).segment(4 * per, n + 1) = scale * sum.real() / double(K);
            b(rows - 1) = scale;
        }
        const Eigen::VectorXd x = scaled_solve(a, b, false);
        const Eigen::VectorXd c_sigma = x.segment(4 * per, n);
        return {c_sigma, relaxed ? x(4 * per + n) : 1.0};
    };

    auto [c_sigma, d_sigma] = solve(true);
    if (!(std::abs(d_sigma) > 1e-8)) std::tie(c_sigma, d_sigma) = solve(false);

    Mat a_hat = Mat::Zero(n, n);
    Eigen::VectorXd b_hat = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex p = poles[static_cast<std::size_t>(k)];
        if (p.imag() == 0.0) {
            a_hat(k, k) = p.real();
            b_hat(k) = 1.0;
        } else {
            a_hat(k, k) = a_hat(k + 1, k + 1) = p.real();
            a_hat(k, k + 1) = p.imag();
            a_hat(k + 1, k) = -p.imag();
            b_hat(k) = 2.0;
            ++k;
        }
    }
    const Mat z = a_hat - b_hat * c_sigma.transpose() / d_sigma;
    Eigen::EigenSolver<Mat> es(z, false);
    if (es.info() != Eigen::Success) throw NumericalError("vector fitting: pole relocation failed");
    return {tidy_poles(es.eigenvalues())};
}

void fit_residues(const AdmittanceTable& t, RationalModel& model, const VfitOptions& opt) {
    const auto n = static_cast<Eigen::Index>(model.poles.size());
    const auto K = static_cast<Eigen::Index>(t.size());
    const Eigen::Index cols = n + (opt.constant_term ? 1 : 0) + (opt.proportional_term ? 1 : 0);
    model.residues.assign(model.poles.size(), Mat2c::Zero());
    model.D.setZero();
    model.E.setZero();
    for (int m = 0; m < 4; ++m) {
        const auto w = element_weights(t, m, opt.weighting);
        Mat a(2 * K, cols);
        Eigen::VectorXd b(2 * K);
        for (Eigen::Index k = 0; k < K; ++k) {
            const double wk = w[static_cast<std::size_t>(k)];
            const Complex s{0.0, kTwoPi * t.freqs[static_cast<std::size_t>(k)]};
            Eigen::RowVectorXcd row(cols);
            row.head(n) = wk * basis(model.poles, s);
            Eigen::Index c = n;
            if (opt.constant_term) row(c++) = wk;
            if (opt.proportional_term) row(c++) = wk * s;
            const Complex h = wk * t.values[static_cast<std::size_t>(k)](m / 2, m % 2);
            a.row(2 * k) = row.real();
            a.row(2 * k + 1) = row.imag();
            b(2 * k) = h.real();
            b(2 * k + 1) = h.imag();
        }
        const Eigen::VectorXd x = scaled_solve(a, b, true);
        for (std::size_t k = 0; k < model.poles.size(); ++k) {
            if (model.poles[k].imag() == 0.0) {
                model.residues[k](m / 2, m % 2) = x(static_cast<Eigen::Index>(k));
            } else {
                model.residues[k](m / 2, m % 2) = coeff_to_residue(x, k, true);
                model.residues[k + 1](m / 2, m % 2) = coeff_to_residue(x, k + 1, false);
                ++k;
            }
        }
        Eigen::Index c = n;
        if (opt.constant_term) model.D(m / 2, m % 2) = x(c++);
        if (opt.proportional_term) model.E(m / 2, m % 2) = x(c++);
    }
}

}  // namespace

std::vector<Complex> initial_poles(double f_lo_hz, double f_hi_hz, int n_poles) {
    std::vector<Complex> p;
    const int pairs = n_poles / 2;
    const double lo = kTwoPi * f_lo_hz, hi = kTwoPi * f_hi_hz;
    if (n_poles % 2) p.push_back({-std::sqrt(lo * hi), 0.0});
    for (int k = 0; k < pairs; ++k) {
        const double beta = pairs == 1 ? std::sqrt(lo * hi) : lo * std::pow(hi / lo, double(k) / (pairs - 1));
        p.push_back({-beta / 100.0, beta});
        p.push_back({-beta / 100.0, -beta});
    }
    return p;
}

RationalModel vector_fit(const AdmittanceTable& table, const VfitOptions& opt) {
    table.validate();
    if (table.empty()) throw ConfigError("vector fitting needs data");
    return vector_fit(table, opt, initial_poles(table.freqs.front(), table.freqs.back(), opt.n_poles));
}

RationalModel vector_fit(const AdmittanceTable& table, const VfitOptions& opt,
                         std::vector<Complex> poles) {
    table.validate();
    if (opt.n_poles < 1) throw ConfigError("fit.n_poles must be >= 1");
    if (opt.n_iterations < 1) throw ConfigError("fit.iterations must be >= 1");
    if (table.size() < 2 * static_cast<std::size_t>(opt.n_poles))
        throw ConfigError("vector fitting " + std::to_string(opt.n_poles) + " poles needs at least " +
                          std::to_string(2 * opt.n_poles) + " frequencies");
    if (poles.size() != static_cast<std::size_t>(opt.n_poles))
        throw ConfigError("initial pole count does not match fit.n_poles");
    RationalModel model;
    double change = 0.0;
    for (int it = 0; it < opt.n_iterations; ++it) {
        std::vector<Complex> next = relocate(table, poles, opt).poles;
        if (next.size() != poles.size()) throw NumericalError("vector fitting lost track of poles");
        change = pole_change(poles, next);
        poles = std::move(next);
        if (change < 1e-12) break;
    }
    model.poles = poles;
    if (change > 1e-3) {
        model.converged = false;
        model.warnings.push_back("pole relocation had not settled (last relative move " + fmt(change) +
                                 ")");
    }
    fit_residues(table, model, opt);
    model.fit_rms = fit_error(model, table);
    return model;
}

double fit_error(const RationalModel& model, const AdmittanceTable& table) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < table.size(); ++k) {
        num += (model.at_hz(table.freqs[k]) - table.values[k]).squaredNorm();
        den += table.values[k].squaredNorm();
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

std::pair<RationalModel, FitReport> auto_order_fit(const AdmittanceTable& table, double rms_target,
                                                   int max_poles, VfitOptions base) {
    if (!(rms_target > 0.0)) throw ConfigError("fit.rms_target must be positive");
    if (max_poles < 1) throw ConfigError("fit.max_poles must be >= 1");
    FitReport report;
    RationalModel best;
    double best_rms = std::numeric_limits<double>::infinity();
    std::vector<int> orders;
    for (int n = 2; n <= max_poles; n += 2) orders.push_back(n);
    if (orders.empty()) orders.push_back(max_poles);
    for (int n : orders) {
        base.n_poles = n;
        report.orders.push_back(n);
        try {
            RationalModel m = vector_fit(table, base);
            report.rms.push_back(m.fit_rms);
            const bool better = m.fit_rms < best_rms;
            if (better) {
                best_rms = m.fit_rms;
                best = m;
            }
            if (m.fit_rms <= rms_target) {
                report.selected_order = n;
                return {std::move(m), report};
            }
        } catch (const Error& e) {
            report.rms.push_back(std::numeric_limits<double>::infinity());
            report.notes.push_back("order " + std::to_string(n) + ": " + e.what());
        }
    }
    if (!std::isfinite(best_rms)) throw NumericalError("vector fitting failed at every order");
    report.underfit = true;
    report.selected_order = static_cast<int>(best.order());
    report.notes.push_back("target " + fmt(rms_target) + " not reached; best rms " + fmt(best_rms));
    return {std::move(best), report};
}

StateSpaceModel realize_state_space(const RationalModel& model) {
    model.validate();
    if (model.E.cwiseAbs().maxCoeff() > 0.0)
        throw ConfigError("model has a proportional term and cannot be realized; refit without E");
    double scale = 0.0;
    for (const auto& r : model.residues) scale = std::max(scale, r.norm());
    const double tol = 1e-13 * scale;

    struct Block {
        Mat a, b, c;
    };
    std::vector<Block> blocks;
    Eigen::Index n = 0;
    for (std::size_t k = 0; k < model.poles.size(); ++k) {
        const Complex p = model.poles[k];
        const Mat2c& res = model.residues[k];
        if (p.imag() != 0.0) ++k;
        Block blk;
        if (p.imag() == 0.0) {
            const Eigen::JacobiSVD<Mat> svd(res.real(), Eigen::ComputeFullU | Eigen::ComputeFullV);
            const auto sv = svd.singularValues();
            const int rank = (sv(0) > tol) + (sv(1) > tol);
            if (rank == 0) continue;
            blk.a = p.real() * Mat::Identity(rank, rank);
            blk.b = sv.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
            blk.c = svd.matrixU().leftCols(rank);
        } else {
            // R = U (S V^H); each rank-one term u w / (s - p) plus its conjugate
            // is one real 2x2 rotation block.
            const Eigen::JacobiSVD<Mat2c> svd(res, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const auto sv = svd.singularValues();
            const int rank = (sv(0) > tol) + (sv(1) > tol);
            if (rank == 0) continue;
            const Eigen::MatrixXcd u = svd.matrixU().leftCols(rank);
            const Eigen::MatrixXcd w =
                sv.head(rank).cast<Complex>().asDiagonal() * svd.matrixV().leftCols(rank).adjoint();
            blk.a = Mat::Zero(2 * rank, 2 * rank);
            blk.b = Mat::Zero(2 * rank, 2);
            blk.c = Mat::Zero(2, 2 * rank);
            for (int r = 0; r < rank; ++r) {
                blk.a.block(2 * r, 2 * r, 2, 2) << p.real(), -p.imag(), p.imag(), p.real();
                blk.b.row(2 * r) = w.row(r).real();
                blk.b.row(2 * r + 1) = w.row(r).imag();
                blk.c.col(2 * r) = 2.0 * u.col(r).real();
                blk.c.col(2 * r + 1) = -2.0 * u.col(r).imag();
            }
        }
        n += blk.a.rows();
        blocks.push_back(std::move(blk));
    }
    StateSpaceModel ss;
    ss.A = Mat::Zero(n, n);
    ss.B = Mat::Zero(n, 2);
    ss.C = Mat::Zero(2, n);
    ss.D = model.D;
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        const auto m = b.a.rows();
        ss.A.block(off, off, m, m) = b.a;
        ss.B.middleRows(off, m) = b.b;
        ss.C.middleCols(off, m) = b.c;
        off += m;
    }
    return ss;
}

void write_model(std::ostream& os, const RationalModel& model) {
    os << "ibrscan-rational-model 1\n";
    os << "fit_rms " << fmt(model.fit_rms) << '\n';
    os << "poles " << model.poles.size() << '\n';
    for (std::size_t k = 0; k < model.poles.size(); ++k) {
        os << "pole " << fmt(model.poles[k].real()) << ' ' << fmt(model.poles[k].imag()) << '\n';
        os << "residue";
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                os << ' ' << fmt(model.residues[k](i, j).real()) << ' '
                   << fmt(model.residues[k](i, j).imag());
        os << '\n';
    }
    os << "D " << fmt(model.D(0, 0)) << ' ' << fmt(model.D(0, 1)) << ' ' << fmt(model.D(1, 0)) << ' '
       << fmt(model.D(1, 1)) << '\n';
    os << "E " << fmt(model.E(0, 0)) << ' ' << fmt(model.E(0, 1)) << ' ' << fmt(model.E(1, 0)) << ' '
       << fmt(model.E(1, 1)) << '\n';
}

RationalModel read_model(std::istream& is) {
    auto fail = [](const std::string& what) -> RationalModel {
        throw ConfigError("model file: " + what);
    };
    RationalModel m;
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "ibrscan-rational-model" || version != 1)
        return fail("bad header");
    std::size_t n = 0;
    if (!(is >> tag >> m.fit_rms) || tag != "fit_rms") return fail("missing fit_rms");
    if (!(is >> tag >> n) || tag != "poles" || n > 10000) return fail("missing pole count");
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0, im = 0;
        if (!(is >> tag >> re >> im) || tag != "pole") return fail("bad pole line");
        m.poles.push_back({re, im});
        if (!(is >> tag) || tag != "residue") return fail("bad residue line");
        Mat2c r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                if (!(is >> re >> im)) return fail("bad residue line");
                r(i, j) = {re, im};
            }
        m.residues.push_back(r);
    }
    for (auto* mat : {&m.D, &m.E}) {
        const char* name = mat == &m.D ? "D" : "E";
        if (!(is >> tag) || tag != name) return fail(std::string("missing ") + name);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (!(is >> (*mat)(i, j))) return fail(std::string("bad ") + name);
    }
    m.validate();
    return m;
}

void save_model(const std::string& path, const RationalModel& model) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    write_model(os, model);
}

RationalModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    return read_model(is);
}

void write_fit_report_csv(std::ostream& os, const FitReport& report) {
    os << "order,fit_rms,selected\n";
    for (std::size_t k = 0; k < report.orders.size(); ++k)
        os << report.orders[k] << ',' << fmt(report.rms[k]) << ','
           << (report.orders[k] == report.selected_order ? 1 : 0) << '\n';
}

}  // namespace ibrscan
