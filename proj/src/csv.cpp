#include "ewa/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ewa/error.hpp"

namespace ewa::csv {

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const std::string& field : split(line)) {
            errno = 0;
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            const bool blank_tail = end && *end == '\0';
            if (field.empty() || !blank_tail || errno == ERANGE) {
                std::ostringstream os;
                os << path.string() << ": line " << lineno << ": cannot parse '" << field << "' as a number";
                throw DataError(os.str());
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream os;
            os << path.string() << ": line " << lineno << ": expected " << rows.front().size() << " fields, found "
               << row.size();
            throw DataError(os.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

Vector read_vector(const std::filesystem::path& path) {
    const Matrix m = read_matrix(path);
    if (m.cols() != 1) {
        std::ostringstream os;
        os << path.string() << ": expected a single column, found " << m.cols();
        throw DataError(os.str());
    }
    return m.col(0);
}

}  // namespace ewa::csv
