#include "ckmr/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ckmr/errors.hpp"

namespace ckmr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, int row, const std::string& column) {
    const std::string t = trimmed(cell);
    if (!t.empty()) {
        errno = 0;
        char* end = nullptr;
        double v = std::strtod(t.c_str(), &end);
        if (end == t.c_str() + t.size() && errno == 0 && std::isfinite(v)) return v;
    }
    throw ParseError("non-numeric or non-finite value '" + cell + "' at data row " +
                     std::to_string(row) + ", column '" + column + "'");
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file (header row required): " + path);

    CsvTable table;
    for (const std::string& name : split_line(line)) table.columns.push_back(trimmed(name));
    const size_t ncol = table.columns.size();

    std::vector<double> buffer;
    int nrow = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != ncol)
            throw ParseError("row " + std::to_string(nrow + 1) + " has " +
                             std::to_string(cells.size()) + " fields, expected " +
                             std::to_string(ncol) + " in " + path);
        for (size_t c = 0; c < ncol; ++c)
            buffer.push_back(parse_cell(cells[c], nrow + 1, table.columns[c]));
        ++nrow;
    }

    table.values.resize(nrow, static_cast<Eigen::Index>(ncol));
    for (int r = 0; r < nrow; ++r)
        for (size_t c = 0; c < ncol; ++c) table.values(r, c) = buffer[r * ncol + c];
    return table;
}

std::vector<std::pair<std::string, std::string>> read_grouping_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grouping file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty grouping file: " + path);
    std::vector<std::string> header = split_line(line);
    if (header.size() != 2 || trimmed(header[0]) != "component" || trimmed(header[1]) != "group")
        throw ParseError("grouping file must have header 'component,group': " + path);

    std::vector<std::pair<std::string, std::string>> rows;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != 2)
            throw ParseError("grouping row " + std::to_string(n + 1) + " must have two fields");
        const std::string comp = trimmed(cells[0]);
        const std::string grp = trimmed(cells[1]);
        if (comp.empty() || grp.empty())
            throw ParseError("grouping row " + std::to_string(n + 1) + " has an empty field");
        rows.emplace_back(comp, grp);
        ++n;
    }
    if (rows.empty()) throw ParseError("grouping file has no rows: " + path);
    return rows;
}

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& values) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    for (size_t c = 0; c < columns.size(); ++c) {
        if (c) out << ',';
        out << columns[c];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out << ',';
            out << format_double(values(r, c));
        }
        out << '\n';
    }
}

}  // namespace ckmr
