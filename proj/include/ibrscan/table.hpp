#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ibrscan/types.hpp"

namespace ibrscan {

// Nonparametric 2x2 admittance samples [[Ydd, Ydq], [Yqd, Yqq]] (p.u.),
// current into the device per unit terminal voltage.
struct AdmittanceTable {
    std::vector<double> freqs;  // Hz, strictly increasing
    std::vector<Mat2c> values;
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return freqs.size(); }
    bool empty() const { return freqs.empty(); }
    void add(double f, const Mat2c& y);
    void validate() const;
};

// CSV: optional "# key=value" metadata lines, then the header
//   freq_hz,Re_Ydd,Im_Ydd,Re_Ydq,Im_Ydq,Re_Yqd,Im_Yqd,Re_Yqq,Im_Yqq
void write_table_csv(std::ostream& os, const AdmittanceTable& table);
AdmittanceTable read_table_csv(std::istream& is);
void save_table(const std::string& path, const AdmittanceTable& table);
AdmittanceTable load_table(const std::string& path);

// ||A - B||_F / ||B||_F, the error measure used throughout.
double relative_frobenius(const Mat2c& a, const Mat2c& reference);
// |a_ij - b_ij| / ||B||_F for one element.
double relative_element(const Mat2c& a, const Mat2c& reference, int i, int j);

// Shortest representation that reads back exactly.
std::string fmt(double v);

}  // namespace ibrscan
