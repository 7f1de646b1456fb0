#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ckmr/dataset.hpp"
#include "ckmr/rng.hpp"
#include "ckmr/sampler.hpp"

namespace ckmr {

/*  Synthetic benchmark scenarios.

    A   ten singleton indices, additive truth
    B   A plus a cos(2x_1) x_5^2 interaction
    C   sixteen exposures in ten indices, sizes (4,4,1,...,1), additive truth
        on the index values E_1 = 3x_1 + 2x_11 + x_12 + 0 x_13,
        E_2 = x_2 + x_14 + x_15 + x_16, E_j = x_j otherwise
    D   C plus the E_1, E_5 interaction

    Exposures are Uniform(-sqrt(3), sqrt(3)) (mean 0, variance 1), two
    independent N(0,1) confounders, y = mu + 0.5 z_1 + eps.  */
struct ScenarioSpec {
    char scenario = 'A';
    int n = 200;
    double sigma2 = 1.0;
    std::uint64_t seed = 0;
    int replicates = 50;

    void validate() const;  // throws ConfigError
};

// Truth surface at one exposure row in generation order x_1..x_p (p = 10 or
// 16); the mean function of the scenario, confounder term excluded.
double scenario_mean(char scenario, const Eigen::VectorXd& x);

struct GeneratedData {
    ExposureDataset data;   // standardized, grouped
    Eigen::VectorXd truth;  // mu at the observed rows
    Eigen::MatrixXd raw;    // exposures before standardization, generation order
};

GeneratedData generate_scenario(const ScenarioSpec& spec, Rng& rng);
// Deterministic per replicate: seeds an Rng with replicate_seed(spec.seed, r).
GeneratedData generate_replicate(const ScenarioSpec& spec, int replicate);

struct FitMetrics {
    double mse = 0.0;
    double bias = 0.0;
    double width = 0.0;     // mean 95% interval width
    double coverage = 0.0;  // fraction of rows whose interval holds the truth
    double all_kernel_off = 0.0;  // fraction of draws with gamma_rho identically 0
    Eigen::VectorXd main_pip, kernel_pip;
    Eigen::MatrixXd joint_pip;
    // inclusion-conditional posterior-median index weights, one vector per group
    std::vector<Eigen::VectorXd> weight_q50;
};

// Centered comparison at the observed rows: each surface draw loses its mean
// over the rows, the truth loses its own, and MSE/bias/width/coverage come
// from the pointwise posterior mean and 2.5/97.5% quantiles.
FitMetrics evaluate_fit(const PosteriorDraws& draws, const Eigen::VectorXd& truth,
                        const ExposureDataset& data, const SplineSystem& splines,
                        const GppKnots& knots, const Hyper& hyper);

// Desk-scale sampler budget for benchmark fits; the sampler's own defaults
// stay untouched for real analyses.
struct BenchmarkConfig {
    ChainConfig chain;
    int n_knots = 50;
    int df = 9;
    int threads = 1;  // replicate workers; results identical for any value

    BenchmarkConfig() {
        chain.iterations = 3000;
        chain.burn_in = 1500;
        chain.thin = 3;
        chain.chains = 1;
    }
};

struct BenchmarkRow {
    Mode mode = Mode::ckmr;
    std::vector<FitMetrics> replicates;
    FitMetrics mean;  // elementwise average over replicates
};

// One generated dataset per replicate, shared across modes; fully
// deterministic in spec.seed.
std::vector<BenchmarkRow> run_benchmark(const ScenarioSpec& spec, const std::vector<Mode>& modes,
                                        const BenchmarkConfig& config);

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);
// Long-format heat table: diagonal entries are main PIPs, off-diagonal the
// joint kernel pair PIPs, averaged over replicates.
void write_pip_heat_csv(const std::string& path, const std::vector<BenchmarkRow>& rows,
                        const std::vector<std::string>& group_names);
void write_metrics_raw_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);

// Synthetic dataset with the case study's shape: 65 exposures in 13 groups
// of sizes (4,5,4,9,3,2,8,4,2,5,7,10,2) and 9 confounders, with a sparse
// index-driven outcome.  Used by the scale tests.
ExposureDataset generate_helix_shaped(int n, std::uint64_t seed);

// Outcome, components (group-major), confounders to `data_path`; the
// component,group map to `groups_path`.  Round-trips through load_dataset.
void write_dataset_csv(const ExposureDataset& data, const std::string& data_path,
                       const std::string& groups_path);

}  // namespace ckmr
