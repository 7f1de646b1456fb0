#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ckmr/csv.hpp"
#include "ckmr/errors.hpp"
#include "ckmr/rng.hpp"
#include "ckmr/simulation.hpp"
#include "ckmr/summaries.hpp"

using namespace ckmr;

namespace {

// Student-t density with 10 degrees of freedom, straight from the gamma
// function form.  Shares nothing with the generator.
double oracle_t10(double x) {
    return std::exp(std::lgamma(5.5) - std::lgamma(5.0) - 0.5 * std::log(10.0 * M_PI) -
                    5.5 * std::log1p(x * x / 10.0));
}

// Independent recomputation of the scenario means: indices assembled by
// explicit dot products, then the additive pieces summed one by one.
double oracle_mu(char sc, const Eigen::VectorXd& x) {
    Eigen::VectorXd e;
    if (sc == 'A' || sc == 'B') {
        e = x;
    } else {
        e.resize(10);
        e[0] = 3.0 * x[0] + 2.0 * x[10] + 1.0 * x[11] + 0.0 * x[12];
        e[1] = x[1] + x[13] + x[14] + x[15];
        for (int j = 2; j < 10; ++j) e[j] = x[j];
    }
    double mu = 2.0 * std::cos(2.0 * e[0]);
    mu += e[1];
    mu += 4.0 * oracle_t10(2.0 * e[2]);
    mu += std::sin(2.0 * e[3]);
    mu += e[4] * e[4];
    mu -= e[5];
    if (sc == 'B' || sc == 'D') mu += std::cos(2.0 * e[0]) * e[4] * e[4];
    return mu;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Helpers mirroring the summaries tests: a tiny two-singleton dataset and
// hand-assembled draws.
ExposureDataset tiny_data(int n, Rng& rng) {
    Eigen::MatrixXd X(n, 2);
    Eigen::MatrixXd C(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.uniform(-2.0, 2.0);
        X(i, 1) = rng.uniform(-2.0, 2.0);
        C(i, 0) = rng.normal();
        y[i] = 0.8 * X(i, 0) + 0.5 * C(i, 0) + 0.3 * rng.normal();
    }
    const GroupingSpec spec = GroupingSpec::from_rows({{"x1", "g1"}, {"x2", "g2"}});
    return build_dataset(y, X, {"x1", "x2"}, C, {"z1"}, spec);
}

PosteriorDraws make_draws(const ExposureDataset& data, const SplineSystem& splines,
                          const std::vector<ModelState>& states) {
    PosteriorDraws out;
    out.names = draw_names(data, splines);
    out.draws.resize(static_cast<Eigen::Index>(states.size()),
                     static_cast<Eigen::Index>(out.names.size()));
    for (size_t r = 0; r < states.size(); ++r) out.draws.row(r) = flatten_state(states[r], 0.0);
    out.chain_ids.assign(states.size(), 0);
    out.iteration_ids.resize(states.size());
    for (size_t r = 0; r < states.size(); ++r) out.iteration_ids[r] = static_cast<int>(r);
    out.diagnostics.resize(1);
    return out;
}

ModelState sim_state(const ExposureDataset& data, const SplineSystem& splines, const Hyper& hyper,
                     const std::vector<int>& pattern, Rng& rng) {
    ModelState s = initial_state(data, splines, hyper);
    for (int j = 0; j < data.n_groups(); ++j) {
        s.gamma[j] = pattern[j] > 0 ? 1 : 0;
        s.gamma_rho[j] = pattern[j] == 2 ? 1 : 0;
        if (pattern[j] > 0)
            for (int k = 0; k < splines.index[j].d; ++k) s.beta[j][k] = 0.4 * rng.normal();
        if (pattern[j] == 2) s.kernel.rho[j] = rng.uniform(0.4, 1.2);
    }
    s.nu2 = rng.uniform(0.3, 1.0);
    s.sigma2 = rng.uniform(0.5, 1.5);
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) s.alpha[i] = 0.3 * rng.normal();
    return s;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("scenario means match an independent closed form") {
    Rng rng(11);

    for (char sc : {'A', 'B'}) {
        for (int t = 0; t < 25; ++t) {
            Eigen::VectorXd x(10);
            for (int k = 0; k < 10; ++k) x[k] = rng.uniform(-1.7, 1.7);
            CHECK(scenario_mean(sc, x) == doctest::Approx(oracle_mu(sc, x)).epsilon(1e-12));
        }
    }
    for (char sc : {'C', 'D'}) {
        for (int t = 0; t < 25; ++t) {
            Eigen::VectorXd x(16);
            for (int k = 0; k < 16; ++k) x[k] = rng.uniform(-1.7, 1.7);
            CHECK(scenario_mean(sc, x) == doctest::Approx(oracle_mu(sc, x)).epsilon(1e-12));
        }
    }

    // value at the origin pins the t-density convention (density of t_10,
    // not a rescaling): 2 + 4 Gamma(5.5) / (sqrt(10 pi) Gamma(5))
    CHECK(scenario_mean('A', Eigen::VectorXd::Zero(10)) == doctest::Approx(3.5561).epsilon(2e-4));

    // the interaction scenarios differ from their additive bases by exactly
    // cos(2 E_1) E_5^2
    for (int t = 0; t < 25; ++t) {
        Eigen::VectorXd x(16);
        for (int k = 0; k < 16; ++k) x[k] = rng.uniform(-1.7, 1.7);
        const Eigen::VectorXd x10 = x.head(10);
        CHECK(scenario_mean('B', x10) - scenario_mean('A', x10) ==
              doctest::Approx(std::cos(2.0 * x10[0]) * x10[4] * x10[4]).epsilon(1e-12));
        const double e1 = 3.0 * x[0] + 2.0 * x[10] + x[11];
        CHECK(scenario_mean('D', x) - scenario_mean('C', x) ==
              doctest::Approx(std::cos(2.0 * e1) * x[4] * x[4]).epsilon(1e-12));
    }

    // the thirteenth exposure carries weight zero in E_1
    Eigen::VectorXd x(16);
    for (int k = 0; k < 16; ++k) x[k] = rng.uniform(-1.7, 1.7);
    Eigen::VectorXd xp = x;
    xp[12] += 0.9;
    CHECK(scenario_mean('C', x) == scenario_mean('C', xp));
    CHECK(scenario_mean('D', x) == scenario_mean('D', xp));
}

TEST_CASE("additive scenarios have vanishing mixed differences") {
    Rng rng(19);
    const double a = 0.6, b = -0.8;

    // additivity is over index values: in scenario C exposures feeding the
    // same index couple through cos(2 E_1), so only cross-group pairs cancel
    const auto group_of = [](char sc, int j) {
        if (sc != 'C') return j;
        if (j == 0 || (j >= 10 && j <= 12)) return 0;
        if (j == 1 || j >= 13) return 1;
        return j;
    };

    for (char sc : {'A', 'C'}) {
        const int p = sc == 'A' ? 10 : 16;
        Eigen::VectorXd x(p);
        for (int k = 0; k < p; ++k) x[k] = rng.uniform(-1.0, 1.0);
        for (int j = 0; j < p; ++j)
            for (int k = j + 1; k < p; ++k) {
                if (group_of(sc, j) == group_of(sc, k)) continue;
                Eigen::VectorXd xj = x, xk = x, xjk = x;
                xj[j] += a;
                xk[k] += b;
                xjk[j] += a;
                xjk[k] += b;
                const double mixed = scenario_mean(sc, xjk) - scenario_mean(sc, xj) -
                                     scenario_mean(sc, xk) + scenario_mean(sc, x);
                CHECK(std::abs(mixed) < 1e-10);
            }
    }

    // scenario B couples exposures 1 and 5
    Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
    Eigen::VectorXd xj = x, xk = x, xjk = x;
    xj[0] += a;
    xk[4] += b;
    xjk[0] += a;
    xjk[4] += b;
    const double mixed = scenario_mean('B', xjk) - scenario_mean('B', xj) -
                         scenario_mean('B', xk) + scenario_mean('B', x);
    CHECK(std::abs(mixed) > 0.05);
}

TEST_CASE("replicates regenerate bit-identically and follow the recipe") {
    ScenarioSpec spec;
    spec.scenario = 'A';
    spec.n = 300;
    spec.sigma2 = 1.0;
    spec.seed = 42;

    const GeneratedData g1 = generate_replicate(spec, 3);
    const GeneratedData g2 = generate_replicate(spec, 3);
    CHECK(g1.data.y == g2.data.y);
    CHECK(g1.raw == g2.raw);
    CHECK(g1.truth == g2.truth);
    const GeneratedData g3 = generate_replicate(spec, 4);
    CHECK(g1.data.y != g3.data.y);

    CHECK(g1.data.n() == 300);
    CHECK(g1.data.n_groups() == 10);
    for (int m = 0; m < 10; ++m) CHECK(g1.data.group_size(m) == 1);
    CHECK(g1.data.group_names[0] == "E1");
    CHECK(g1.data.group_names[9] == "E10");
    CHECK(g1.data.component_names[4][0] == "x5");
    CHECK(g1.data.Z.cols() == 3);
    CHECK(g1.data.confounder_names == std::vector<std::string>{"z1", "z2"});

    const double s3 = std::sqrt(3.0);
    CHECK(g1.raw.minCoeff() >= -s3);
    CHECK(g1.raw.maxCoeff() <= s3);
    for (int i = 0; i < spec.n; ++i)
        CHECK(g1.truth[i] ==
              doctest::Approx(oracle_mu('A', g1.raw.row(i).transpose())).epsilon(1e-12));

    // scaling sigma2 scales only the noise: with a shared stream the residual
    // y - mu - 0.5 z1 doubles exactly when the variance quadruples
    ScenarioSpec spec4 = spec;
    spec4.sigma2 = 4.0;
    const GeneratedData g4 = generate_replicate(spec4, 3);
    CHECK(g4.raw == g1.raw);
    const int z1_col = 10;  // scaled_columns order: 10 exposures, then z1, z2
    CHECK(g1.data.scaled_columns[z1_col] == "z1");
    const Eigen::VectorXd z1 = g1.data.Z.col(1) * g1.data.column_sds[z1_col] +
                               Eigen::VectorXd::Constant(spec.n, g1.data.column_means[z1_col]);
    const Eigen::VectorXd r1 = g1.data.y - g1.truth - 0.5 * z1;
    const Eigen::VectorXd r4 = g4.data.y - g4.truth - 0.5 * z1;
    CHECK((r4 - 2.0 * r1).lpNorm<Eigen::Infinity>() < 1e-10);

    ScenarioSpec specC = spec;
    specC.scenario = 'C';
    const GeneratedData gc = generate_replicate(specC, 0);
    CHECK(gc.data.n_groups() == 10);
    CHECK(gc.data.group_size(0) == 4);
    CHECK(gc.data.group_size(1) == 4);
    for (int m = 2; m < 10; ++m) CHECK(gc.data.group_size(m) == 1);
    CHECK(gc.data.component_names[0] == std::vector<std::string>{"x1", "x11", "x12", "x13"});
    CHECK(gc.data.component_names[1] == std::vector<std::string>{"x2", "x14", "x15", "x16"});
    CHECK(gc.data.component_names[2][0] == "x3");
    for (int i = 0; i < spec.n; ++i)
        CHECK(gc.truth[i] ==
              doctest::Approx(oracle_mu('C', gc.raw.row(i).transpose())).epsilon(1e-12));

    ScenarioSpec bad = spec;
    bad.n = 20;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.sigma2 = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.scenario = 'E';
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("fit metrics agree with direct arithmetic") {
    Rng rng(23);
    const ExposureDataset data = tiny_data(20, rng);
    Hyper h;
    h.df = 4;
    h.n_knots = 20;
    const SplineSystem splines = build_spline_system(data, h.df);
    const GppKnots knots = select_knots(data, h.knots_for(data.n()), knots_seed(5));

    std::vector<ModelState> states;
    states.push_back(sim_state(data, splines, h, {2, 1}, rng));
    states.push_back(sim_state(data, splines, h, {1, 1}, rng));
    states.push_back(sim_state(data, splines, h, {1, 0}, rng));
    const PosteriorDraws draws = make_draws(data, splines, states);

    Eigen::VectorXd truth(20);
    for (int i = 0; i < 20; ++i) truth[i] = rng.uniform(-1.0, 1.0);

    const FitMetrics m = evaluate_fit(draws, truth, data, splines, knots, h);

    // everything below recomputes the metrics from scratch on the raw
    // surface draws
    QueryRows q;
    q.groups = data.groups;
    Eigen::MatrixXd S = predict_surface(draws, data, splines, knots, h, q);
    for (int r = 0; r < 3; ++r) S.row(r).array() -= S.row(r).mean();
    Eigen::VectorXd tc = truth.array() - truth.mean();

    double mse = 0.0, bias = 0.0, width = 0.0;
    int covered = 0;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> col = {S(0, i), S(1, i), S(2, i)};
        std::sort(col.begin(), col.end());
        const double mean = (col[0] + col[1] + col[2]) / 3.0;
        const double lo = 0.95 * col[0] + 0.05 * col[1];
        const double hi = 0.05 * col[1] + 0.95 * col[2];
        mse += (mean - tc[i]) * (mean - tc[i]) / 20.0;
        bias += (mean - tc[i]) / 20.0;
        width += (hi - lo) / 20.0;
        if (lo <= tc[i] && tc[i] <= hi) ++covered;
    }
    CHECK(m.mse == doctest::Approx(mse).epsilon(1e-12));
    CHECK(m.bias == doctest::Approx(bias).epsilon(1e-12));
    CHECK(m.width == doctest::Approx(width).epsilon(1e-12));
    CHECK(m.coverage == doctest::Approx(covered / 20.0).epsilon(1e-12));
    CHECK(m.all_kernel_off == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.main_pip.size() == 2);
    CHECK(m.main_pip[0] == doctest::Approx(1.0));
    CHECK(m.main_pip[1] == doctest::Approx(2.0 / 3.0));
    CHECK(m.kernel_pip[0] == doctest::Approx(1.0 / 3.0));
    CHECK(m.joint_pip(0, 1) == doctest::Approx(0.0));
    // singleton indices pin theta to +1, so the conditional medians are exact
    REQUIRE(m.weight_q50.size() == 2);
    CHECK(m.weight_q50[0][0] == 1.0);
    CHECK(m.weight_q50[1][0] == 1.0);

    SUBCASE("identical draws centered on the truth score perfectly") {
        std::vector<ModelState> same = {states[1], states[1], states[1]};
        const PosteriorDraws d2 = make_draws(data, splines, same);
        Eigen::MatrixXd S2 = predict_surface(d2, data, splines, knots, h, q);
        // shifting the truth by a constant changes nothing but the rounding
        // of the centering step
        const Eigen::VectorXd t2 = S2.row(0).transpose() + Eigen::VectorXd::Constant(20, 5.0);
        const FitMetrics m2 = evaluate_fit(d2, t2, data, splines, knots, h);
        CHECK(m2.mse < 1e-28);
        CHECK(std::abs(m2.bias) < 1e-13);
        CHECK(m2.width < 1e-12);
        // with distinct draws and the truth at the posterior mean, every
        // interval holds the truth (zero-width intervals are knife-edge in
        // floating point, so coverage is asserted on the fat ones)
        const Eigen::MatrixXd Sraw = predict_surface(draws, data, splines, knots, h, q);
        const Eigen::VectorXd t3 =
            Sraw.colwise().mean().transpose() + Eigen::VectorXd::Constant(20, 7.0);
        const FitMetrics m3 = evaluate_fit(draws, t3, data, splines, knots, h);
        CHECK(m3.coverage == doctest::Approx(1.0));
        CHECK(m3.mse < 1e-28);
    }

    SUBCASE("draws from a different basis are rejected") {
        const SplineSystem other = build_spline_system(data, 5);
        const PosteriorDraws d3 =
            make_draws(data, other, {sim_state(data, other, h, {1, 1}, rng)});
        CHECK_THROWS_AS(evaluate_fit(d3, truth, data, splines, knots, h), ConfigError);
        Eigen::VectorXd short_truth(7);
        short_truth.setZero();
        CHECK_THROWS_AS(evaluate_fit(draws, short_truth, data, splines, knots, h), ConfigError);
    }
}

TEST_CASE("the benchmark pipeline is deterministic end to end") {
    ScenarioSpec spec;
    spec.scenario = 'A';
    spec.n = 60;
    spec.sigma2 = 1.0;
    spec.seed = 5;
    spec.replicates = 2;

    BenchmarkConfig cfg;
    cfg.chain.iterations = 160;
    cfg.chain.burn_in = 80;
    cfg.chain.thin = 2;
    cfg.n_knots = 20;
    cfg.df = 5;

    const std::vector<Mode> modes = {Mode::ckmr, Mode::kernel_only};
    const std::vector<BenchmarkRow> rows = run_benchmark(spec, modes, cfg);

    REQUIRE(rows.size() == 2);
    for (const BenchmarkRow& row : rows) {
        REQUIRE(row.replicates.size() == 2);
        for (const FitMetrics& m : row.replicates) {
            CHECK(std::isfinite(m.mse));
            CHECK(m.mse >= 0.0);
            CHECK(m.width >= 0.0);
            CHECK(m.coverage >= 0.0);
            CHECK(m.coverage <= 1.0);
            CHECK(m.main_pip.size() == 10);
            CHECK(m.joint_pip.rows() == 10);
        }
        CHECK(row.mean.mse == doctest::Approx((row.replicates[0].mse + row.replicates[1].mse) / 2.0)
                                  .epsilon(1e-12));
    }

    const std::vector<BenchmarkRow> again = run_benchmark(spec, modes, cfg);
    CHECK(rows[0].mean.mse == again[0].mean.mse);
    CHECK(rows[1].mean.coverage == again[1].mean.coverage);
    CHECK(rows[0].replicates[1].main_pip == again[0].replicates[1].main_pip);

    // worker count changes scheduling only, never results
    BenchmarkConfig cfg3 = cfg;
    cfg3.threads = 3;
    const std::vector<BenchmarkRow> threaded = run_benchmark(spec, modes, cfg3);
    CHECK(threaded[0].mean.mse == rows[0].mean.mse);
    CHECK(threaded[1].replicates[0].main_pip == rows[1].replicates[0].main_pip);

    const std::string dir = "/tmp/ckmr_sim_test";
    std::filesystem::create_directories(dir);
    write_benchmark_csv(dir + "/benchmark.csv", rows);
    write_pip_heat_csv(dir + "/pip_heat.csv", rows,
                       {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9", "E10"});
    write_metrics_raw_csv(dir + "/metrics_raw.csv", rows);

    const std::vector<std::string> bench = read_lines(dir + "/benchmark.csv");
    REQUIRE(bench.size() == 3);
    CHECK(bench[0] == "method,mse,bias,width,coverage,all_kernel_off");
    CHECK(bench[1].rfind("ckmr,", 0) == 0);
    CHECK(bench[2].rfind("kernel-only,", 0) == 0);

    const std::vector<std::string> heat = read_lines(dir + "/pip_heat.csv");
    REQUIRE(heat.size() == 1 + 2 * 100);
    CHECK(heat[0] == "method,group_j,group_k,pip");

    const std::vector<std::string> raw = read_lines(dir + "/metrics_raw.csv");
    REQUIRE(raw.size() == 1 + 4);
    CHECK(raw[0] == "method,replicate,mse,bias,width,coverage,all_kernel_off");
}

TEST_CASE("the case-study-shaped generator has the advertised dimensions") {
    const ExposureDataset data = generate_helix_shaped(1301, 9);
    CHECK(data.n() == 1301);
    REQUIRE(data.n_groups() == 13);
    const std::vector<int> sizes = {4, 5, 4, 9, 3, 2, 8, 4, 2, 5, 7, 10, 2};
    int total = 0;
    for (int m = 0; m < 13; ++m) {
        CHECK(data.group_size(m) == sizes[m]);
        total += data.group_size(m);
    }
    CHECK(total == 65);
    CHECK(data.Z.cols() == 10);
    CHECK(data.confounder_names.size() == 9);
    CHECK(data.y.allFinite());

    // a second call with the same seed is the same dataset
    const ExposureDataset data2 = generate_helix_shaped(1301, 9);
    CHECK(data.y == data2.y);

    const std::string dir = "/tmp/ckmr_sim_test";
    std::filesystem::create_directories(dir);
    write_dataset_csv(data, dir + "/helix.csv", dir + "/helix_groups.csv");

    const auto rows = read_grouping_csv(dir + "/helix_groups.csv");
    CHECK(rows.size() == 65);
    const ExposureDataset back = load_dataset(dir + "/helix.csv", GroupingSpec::from_rows(rows),
                                              "y", data.confounder_names);
    CHECK(back.n() == 1301);
    CHECK(back.n_groups() == 13);
    CHECK(back.y == data.y);
    for (int m = 0; m < 13; ++m)
        CHECK((back.groups[m] - data.groups[m]).lpNorm<Eigen::Infinity>() < 1e-12);
}

}  // TEST_SUITE
