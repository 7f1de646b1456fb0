#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ckmr {

/*  Grouped exposure data model shared by every downstream module.

    Exposures are partitioned into M mutually exclusive groups; group m holds
    L_m components and is stored as its own N x L_m matrix so index values
    E_m = X_m * theta_m are a single matrix-vector product.  All exposure and
    confounder columns are standardized in place (sample sd, N-1 denominator);
    the outcome is left in its original units.  Z carries an injected leading
    intercept column of ones.  */
struct ExposureDataset {
    Eigen::VectorXd y;                           // outcome, length N, original units
    std::vector<Eigen::MatrixXd> groups;         // M matrices, N x L_m, standardized
    Eigen::MatrixXd Z;                           // N x q, column 0 is the intercept
    std::vector<std::string> group_names;        // length M
    std::vector<std::vector<std::string>> component_names;  // per group, length L_m
    std::vector<std::string> confounder_names;   // length q-1 (intercept excluded)

    // standardization record, flattened in group-major component order then confounders
    std::vector<std::string> scaled_columns;
    Eigen::VectorXd column_means;
    Eigen::VectorXd column_sds;

    int n() const { return static_cast<int>(y.size()); }
    int n_groups() const { return static_cast<int>(groups.size()); }
    int group_size(int m) const { return static_cast<int>(groups[m].cols()); }
    int n_confounders() const { return static_cast<int>(Z.cols()); }
    int n_exposures() const;
};

struct GroupingSpec {
    std::vector<std::string> group_names;                   // order of first appearance
    std::vector<std::vector<std::string>> members;          // component names per group

    static GroupingSpec from_rows(const std::vector<std::pair<std::string, std::string>>& rows);
};

// Standardizes v to mean 0, sd 1 (N-1 denominator). Throws on constant input.
void standardize_column(Eigen::Ref<Eigen::VectorXd> v, const std::string& name, double* mean_out,
                        double* sd_out);

ExposureDataset load_dataset(const std::string& data_path, const GroupingSpec& grouping,
                             const std::string& outcome_col,
                             const std::vector<std::string>& confounder_cols);

// In-memory variant used by the simulation harness; columns of `exposures`
// are consumed in grouping order.
ExposureDataset build_dataset(const Eigen::VectorXd& y, const Eigen::MatrixXd& exposures,
                              const std::vector<std::string>& exposure_names,
                              const Eigen::MatrixXd& confounders,
                              const std::vector<std::string>& confounder_names,
                              const GroupingSpec& grouping);

}  // namespace ckmr
