#include "ibrscan/table.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ibrscan/errors.hpp"

namespace ibrscan {

void AdmittanceTable::add(double f, const Mat2c& y) {
    if (!freqs.empty() && !(f > freqs.back()))
        throw ConfigError("admittance table: frequencies must be strictly increasing");
    freqs.push_back(f);
    values.push_back(y);
}

void AdmittanceTable::validate() const {
    if (freqs.size() != values.size()) throw ConfigError("admittance table: size mismatch");
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        if (!std::isfinite(freqs[k]) || (k > 0 && !(freqs[k] > freqs[k - 1])))
            throw ConfigError("admittance table: frequencies must be strictly increasing");
        if (!values[k].allFinite())
            throw ConfigError("admittance table: non-finite value at " + fmt(freqs[k]) + " Hz");
    }
}

std::string fmt(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

void write_table_csv(std::ostream& os, const AdmittanceTable& table) {
    for (const auto& [k, v] : table.metadata) os << "# " << k << '=' << v << '\n';
    os << "freq_hz,Re_Ydd,Im_Ydd,Re_Ydq,Im_Ydq,Re_Yqd,Im_Yqd,Re_Yqq,Im_Yqq\n";
    for (std::size_t k = 0; k < table.size(); ++k) {
        const Mat2c& y = table.values[k];
        os << fmt(table.freqs[k]);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) os << ',' << fmt(y(i, j).real()) << ',' << fmt(y(i, j).imag());
        os << '\n';
    }
}

AdmittanceTable read_table_csv(std::istream& is) {
    AdmittanceTable table;
    std::string line;
    bool header = false;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            if (eq != std::string::npos) table.metadata[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        if (!header) {
            if (line.rfind("freq_hz,", 0) != 0) throw ConfigError("admittance table: bad header");
            header = true;
            continue;
        }
        std::istringstream row(line);
        std::string field;
        double v[9];
        for (double& x : v) {
            if (!std::getline(row, field, ','))
                throw ConfigError("admittance table: short row at line " + std::to_string(line_no));
            try {
                x = std::stod(field);
            } catch (const std::exception&) {
                throw ConfigError("admittance table: bad number at line " + std::to_string(line_no));
            }
        }
        Mat2c y;
        y << Complex{v[1], v[2]}, Complex{v[3], v[4]}, Complex{v[5], v[6]}, Complex{v[7], v[8]};
        table.add(v[0], y);
    }
    if (!header) throw ConfigError("admittance table: missing header");
    table.validate();
    return table;
}

void save_table(const std::string& path, const AdmittanceTable& table) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    write_table_csv(os, table);
}

AdmittanceTable load_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    return read_table_csv(is);
}

double relative_frobenius(const Mat2c& a, const Mat2c& reference) {
    return (a - reference).norm() / reference.norm();
}

double relative_element(const Mat2c& a, const Mat2c& reference, int i, int j) {
    return std::abs(a(i, j) - reference(i, j)) / reference.norm();
}

}  // namespace ibrscan
