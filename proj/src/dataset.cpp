#include "ckmr/dataset.hpp"

#include <cmath>
#include <set>

#include "ckmr/csv.hpp"
#include "ckmr/errors.hpp"

namespace ckmr {

int ExposureDataset::n_exposures() const {
    int p = 0;
    for (const auto& g : groups) p += static_cast<int>(g.cols());
    return p;
}

GroupingSpec GroupingSpec::from_rows(const std::vector<std::pair<std::string, std::string>>& rows) {
    GroupingSpec spec;
    std::set<std::string> seen_components;
    for (const auto& [component, group] : rows) {
        if (!seen_components.insert(component).second)
            throw ParseError("duplicate component '" + component + "' in grouping");
        int g = -1;
        for (size_t i = 0; i < spec.group_names.size(); ++i)
            if (spec.group_names[i] == group) g = static_cast<int>(i);
        if (g < 0) {
            spec.group_names.push_back(group);
            spec.members.emplace_back();
            g = static_cast<int>(spec.group_names.size()) - 1;
        }
        spec.members[static_cast<size_t>(g)].push_back(component);
    }
    return spec;
}

void standardize_column(Eigen::Ref<Eigen::VectorXd> v, const std::string& name, double* mean_out,
                        double* sd_out) {
    const Eigen::Index n = v.size();
    if (n < 2) throw ParseError("column '" + name + "' needs at least 2 rows to standardize");
    const double mean = v.mean();
    const double ss = (v.array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd <= 0.0) throw ParseError("degenerate column '" + name + "': constant values");
    v = (v.array() - mean) / sd;
    if (mean_out) *mean_out = mean;
    if (sd_out) *sd_out = sd;
}

namespace {

ExposureDataset assemble(const Eigen::VectorXd& y,
                         const std::vector<Eigen::MatrixXd>& raw_groups,
                         const Eigen::MatrixXd& raw_confounders, const GroupingSpec& grouping,
                         const std::vector<std::string>& confounder_names) {
    ExposureDataset ds;
    ds.y = y;
    ds.group_names = grouping.group_names;
    ds.component_names = grouping.members;
    ds.confounder_names = confounder_names;
    ds.groups = raw_groups;

    const int n = static_cast<int>(y.size());
    std::vector<std::string> scaled;
    std::vector<double> means, sds;

    for (size_t m = 0; m < ds.groups.size(); ++m) {
        if (grouping.members[m].empty())
            throw ParseError("group '" + grouping.group_names[m] + "' has no components");
        for (Eigen::Index c = 0; c < ds.groups[m].cols(); ++c) {
            double mean, sd;
            standardize_column(ds.groups[m].col(c), grouping.members[m][c], &mean, &sd);
            scaled.push_back(grouping.members[m][c]);
            means.push_back(mean);
            sds.push_back(sd);
        }
    }

    ds.Z.resize(n, raw_confounders.cols() + 1);
    ds.Z.col(0).setOnes();
    for (Eigen::Index c = 0; c < raw_confounders.cols(); ++c) {
        Eigen::VectorXd col = raw_confounders.col(c);
        double mean, sd;
        standardize_column(col, confounder_names[static_cast<size_t>(c)], &mean, &sd);
        ds.Z.col(c + 1) = col;
        scaled.push_back(confounder_names[static_cast<size_t>(c)]);
        means.push_back(mean);
        sds.push_back(sd);
    }

    ds.scaled_columns = std::move(scaled);
    ds.column_means = Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    ds.column_sds = Eigen::Map<Eigen::VectorXd>(sds.data(), static_cast<Eigen::Index>(sds.size()));
    return ds;
}

}  // namespace

ExposureDataset load_dataset(const std::string& data_path, const GroupingSpec& grouping,
                             const std::string& outcome_col,
                             const std::vector<std::string>& confounder_cols) {
    const CsvTable table = read_csv(data_path);
    const int n = static_cast<int>(table.values.rows());
    if (n < 2) throw ParseError("dataset needs at least 2 rows: " + data_path);

    const int y_idx = table.column_index(outcome_col);
    if (y_idx < 0) throw ParseError("outcome column '" + outcome_col + "' not found");

    std::vector<Eigen::MatrixXd> raw_groups;
    for (size_t m = 0; m < grouping.group_names.size(); ++m) {
        Eigen::MatrixXd g(n, static_cast<Eigen::Index>(grouping.members[m].size()));
        for (size_t c = 0; c < grouping.members[m].size(); ++c) {
            const int idx = table.column_index(grouping.members[m][c]);
            if (idx < 0)
                throw ParseError("exposure column '" + grouping.members[m][c] +
                                 "' from the grouping file not found in the data");
            g.col(static_cast<Eigen::Index>(c)) = table.values.col(idx);
        }
        raw_groups.push_back(std::move(g));
    }

    Eigen::MatrixXd raw_conf(n, static_cast<Eigen::Index>(confounder_cols.size()));
    for (size_t c = 0; c < confounder_cols.size(); ++c) {
        const int idx = table.column_index(confounder_cols[c]);
        if (idx < 0) throw ParseError("confounder column '" + confounder_cols[c] + "' not found");
        raw_conf.col(static_cast<Eigen::Index>(c)) = table.values.col(idx);
    }

    return assemble(table.values.col(y_idx), raw_groups, raw_conf, grouping, confounder_cols);
}

ExposureDataset build_dataset(const Eigen::VectorXd& y, const Eigen::MatrixXd& exposures,
                              const std::vector<std::string>& exposure_names,
                              const Eigen::MatrixXd& confounders,
                              const std::vector<std::string>& confounder_names,
                              const GroupingSpec& grouping) {
    if (exposures.cols() != static_cast<Eigen::Index>(exposure_names.size()))
        throw ConfigError("build_dataset: exposure name count mismatch");

    auto find_col = [&](const std::string& name) {
        for (size_t i = 0; i < exposure_names.size(); ++i)
            if (exposure_names[i] == name) return static_cast<Eigen::Index>(i);
        throw ParseError("exposure column '" + name + "' from the grouping not found");
    };

    std::vector<Eigen::MatrixXd> raw_groups;
    for (size_t m = 0; m < grouping.group_names.size(); ++m) {
        Eigen::MatrixXd g(y.size(), static_cast<Eigen::Index>(grouping.members[m].size()));
        for (size_t c = 0; c < grouping.members[m].size(); ++c)
            g.col(static_cast<Eigen::Index>(c)) = exposures.col(find_col(grouping.members[m][c]));
        raw_groups.push_back(std::move(g));
    }
    return assemble(y, raw_groups, confounders, grouping, confounder_names);
}

}  // namespace ckmr
