#include "ibrscan/state_space.hpp"

#include <cmath>
#include <limits>

#include "ibrscan/errors.hpp"

namespace ibrscan {

StateSpaceModel StateSpaceModel::static_gain(const Mat& d) {
    return {Mat(0, 0), Mat(0, d.cols()), Mat(d.rows(), 0), d};
}

void StateSpaceModel::validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || C.rows() != D.rows() ||
        B.cols() != D.cols())
        throw ConfigError("state-space model: inconsistent dimensions");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
        throw NumericalError("state-space model: non-finite entries");
}

Eigen::MatrixXcd StateSpaceModel::response(Complex s) const {
    Eigen::MatrixXcd out = D.cast<Complex>();
    if (A.rows() == 0) return out;
    Eigen::MatrixXcd m = -A.cast<Complex>();
    m.diagonal().array() += s;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    if (!(lu.rcond() > 1e-14))
        throw NumericalError("frequency response: s = " + fmt(s.real()) + "+j" + fmt(s.imag()) +
                             " is an eigenvalue of A");
    out += C.cast<Complex>() * lu.solve(B.cast<Complex>());
    return out;
}

Mat2c StateSpaceModel::response_hz(double f_hz) const {
    if (n_inputs() != 2 || n_outputs() != 2) throw ConfigError("response_hz needs a 2x2 system");
    return response({0.0, kTwoPi * f_hz});
}

Eigen::VectorXcd StateSpaceModel::eigenvalues() const {
    if (A.rows() == 0) return {};
    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
    return es.eigenvalues();
}

AdmittanceTable frequency_response(const StateSpaceModel& ss, const std::vector<double>& freqs_hz) {
    AdmittanceTable t;
    for (double f : freqs_hz) t.add(f, ss.response_hz(f));
    return t;
}

double max_real_part(const Eigen::VectorXcd& eig) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& l : eig) m = std::max(m, l.real());
    return m;
}

}  // namespace ibrscan
