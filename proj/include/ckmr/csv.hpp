#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ckmr {

struct CsvTable {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;  // rows x columns.size()

    int column_index(const std::string& name) const;  // -1 if absent
};

// Comma-delimited, mandatory header row, '.' decimal separator.
// Any cell that fails to parse as a finite number raises ParseError naming
// the 1-based data row and the column.
CsvTable read_csv(const std::string& path);

// Two-column grouping file with header "component,group".
std::vector<std::pair<std::string, std::string>> read_grouping_csv(const std::string& path);

// Shortest round-trippable decimal representation; identical input bits give
// identical text, which the byte-identical-rerun contract relies on.
std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& values);

}  // namespace ckmr
