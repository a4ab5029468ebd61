#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ibrscan/state_space.hpp"
#include "ibrscan/table.hpp"

namespace ibrscan {

// Y(s) = sum_k R_k / (s - p_k) + D + s E. Complex poles appear as adjacent
// conjugate pairs (positive imaginary part first) with conjugate residues.
struct RationalModel {
    std::vector<Complex> poles;  // rad/s
    std::vector<Mat2c> residues;
    Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
    double fit_rms = 0.0;
    bool converged = true;
    std::vector<std::string> warnings;

    Mat2c eval(Complex s) const;
    Mat2c at_hz(double f_hz) const { return eval({0.0, kTwoPi * f_hz}); }
    std::size_t order() const { return poles.size(); }
    void validate() const;
};

enum class Weighting { Uniform, InverseMagnitude };

struct VfitOptions {
    int n_poles = 6;
    int n_iterations = 20;
    bool constant_term = true;
    bool proportional_term = false;
    Weighting weighting = Weighting::Uniform;
};

// Relaxed vector fitting with one pole set shared by all four elements.
RationalModel vector_fit(const AdmittanceTable& table, const VfitOptions& opt);

// Same, starting from given poles instead of the default log-spaced set.
RationalModel vector_fit(const AdmittanceTable& table, const VfitOptions& opt,
                         std::vector<Complex> initial_poles);

std::vector<Complex> initial_poles(double f_lo_hz, double f_hi_hz, int n_poles);

// Relative rms error sqrt(sum ||Y_fit - Y||_F^2 / sum ||Y||_F^2).
double fit_error(const RationalModel& model, const AdmittanceTable& table);

struct FitReport {
    std::vector<int> orders;
    std::vector<double> rms;  // inf where the fit failed
    int selected_order = 0;
    bool underfit = false;
    std::vector<std::string> notes;
};

// Orders 2, 4, ... up to max_poles; the first reaching rms_target wins,
// otherwise the best one is returned with `underfit` set.
std::pair<RationalModel, FitReport> auto_order_fit(const AdmittanceTable& table, double rms_target,
                                                   int max_poles, VfitOptions base = {});

// Modal realization. A real pole with residue of rank r contributes r
// states; a conjugate pair contributes 2r. Rejects a nonzero E term.
StateSpaceModel realize_state_space(const RationalModel& model);

void write_model(std::ostream& os, const RationalModel& model);
RationalModel read_model(std::istream& is);
void save_model(const std::string& path, const RationalModel& model);
RationalModel load_model(const std::string& path);

void write_fit_report_csv(std::ostream& os, const FitReport& report);

}  // namespace ibrscan
