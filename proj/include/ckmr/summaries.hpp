#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ckmr/dataset.hpp"
#include "ckmr/model.hpp"
#include "ckmr/sampler.hpp"

namespace ckmr {

struct PipSummary {
    Eigen::VectorXd main;    // M, mean of gamma_m
    Eigen::VectorXd kernel;  // M, mean of gamma_rho_m
    Eigen::MatrixXd joint;   // M x M, mean of gamma_rho_j * gamma_rho_k; diagonal == kernel
};

// Throws ConfigError on an empty draw set.
PipSummary compute_pips(const PosteriorDraws& draws);

// Query rows in standardized exposure space, one matrix per group with the
// training column layout (rows align across groups).
struct QueryRows {
    std::vector<Eigen::MatrixXd> groups;

    int n() const { return groups.empty() ? 0 : static_cast<int>(groups[0].rows()); }
};

/*  Posterior surface draws at the query rows, one row per stored draw.

    surface(x*) = sum_{m: gamma_m = 1} B*_m(x*) beta_m
                + nu2 k~*' P [I + nu2 P Kt P]^-1 (y - B beta - Z alpha)

    with k~* the predictive-process kernel vector between x* and the training
    rows.  Draws with gamma_rho identically zero skip the second term, so it
    is exactly 0 there rather than a rounded-off rank-one residue.  Query
    components outside the standardized training range widened by 20% add one
    warning line per component; values beyond the spline knot interval throw.  */
Eigen::MatrixXd predict_surface(const PosteriorDraws& draws, const ExposureDataset& data,
                                const SplineSystem& splines, const GppKnots& knots,
                                const Hyper& hyper, const QueryRows& query,
                                std::vector<std::string>* warnings = nullptr);

struct CurveGrid {
    int index = 0;          // group id, 0-based
    Eigen::VectorXd grid;   // index values along theta-hat
    Eigen::VectorXd mean;   // posterior mean of the centered surface
    Eigen::VectorXd lo;     // 2.5% quantile
    Eigen::VectorXd hi;     // 97.5% quantile
};

/*  One exposure-response curve per index: the index varies over an n_grid
    point grid spanning the 1st to 99th percentile of its posterior-mean
    direction's training index values, every other index sits at its median,
    and each draw's surface is centered over the grid before the pointwise
    mean and quantiles are taken (the level is absorbed by the intercept).  */
std::vector<CurveGrid> indexwise_curves(const PosteriorDraws& draws, const ExposureDataset& data,
                                        const SplineSystem& splines, const GppKnots& knots,
                                        const Hyper& hyper, int n_grid = 50);

struct InteractionFamily {
    int j = 0, k = 0;                 // varied index, pinned index
    std::vector<double> percentiles;  // pin levels, in percent
    std::vector<CurveGrid> curves;    // one per percentile, all with index == j
};

// Curves of index j with index k pinned at the given percentiles of its
// training index values (other indices at medians).  Throws ConfigError on
// j == k or an out-of-range index.
InteractionFamily interaction_curve_family(const PosteriorDraws& draws,
                                           const ExposureDataset& data,
                                           const SplineSystem& splines, const GppKnots& knots,
                                           const Hyper& hyper, int j, int k,
                                           const std::vector<double>& percentiles = {10.0, 50.0,
                                                                                     90.0},
                                           int n_grid = 50);

struct WeightSummary {
    int group = 0;
    int component = 0;
    long long n_included = 0;  // draws with gamma = 1 the quantiles condition on
    double q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

// Inclusion-conditional weight quantiles.  An index no draw includes falls
// back to the unconditional draws (a point mass at the frozen direction)
// with n_included reported as 0.
std::vector<WeightSummary> weight_summaries(const PosteriorDraws& draws,
                                            const ExposureDataset& data);

// Linear-interpolation sample quantile (numpy default convention), p in [0,1].
double sample_quantile(std::vector<double> xs, double p);

void write_pips_csv(const std::string& path, const PipSummary& pips,
                    const std::vector<std::string>& group_names);
void write_curves_csv(const std::string& path, const std::vector<CurveGrid>& curves,
                      const std::vector<std::string>& group_names);
// Rows carry the pinned index and its percentile next to each curve point.
void write_interactions_csv(const std::string& path,
                            const std::vector<InteractionFamily>& families,
                            const std::vector<std::string>& group_names);
void write_weights_csv(const std::string& path, const std::vector<WeightSummary>& rows,
                       const ExposureDataset& data);

}  // namespace ckmr
