#pragma once

#include <vector>

#include "ibrscan/table.hpp"
#include "ibrscan/types.hpp"

namespace ibrscan {

// x' = A x + B u, y = C x + D u with time in seconds.
struct StateSpaceModel {
    Mat A;
    Mat B;
    Mat C;
    Mat D;

    static StateSpaceModel static_gain(const Mat& d);

    Eigen::Index n_states() const { return A.rows(); }
    Eigen::Index n_inputs() const { return D.cols(); }
    Eigen::Index n_outputs() const { return D.rows(); }
    void validate() const;

    // C (sI - A)^-1 B + D. Throws NumericalError when s is (numerically) an
    // eigenvalue of A.
    Eigen::MatrixXcd response(Complex s) const;
    Mat2c response_hz(double f_hz) const;
    Eigen::VectorXcd eigenvalues() const;
};

AdmittanceTable frequency_response(const StateSpaceModel& ss, const std::vector<double>& freqs_hz);

// Largest real part (-inf for a static system).
double max_real_part(const Eigen::VectorXcd& eig);

}  // namespace ibrscan
