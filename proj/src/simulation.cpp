#include "ckmr/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>
#include <utility>

#include "ckmr/csv.hpp"
#include "ckmr/errors.hpp"
#include "ckmr/summaries.hpp"

namespace ckmr {

namespace {

// density of a Student-t with 10 degrees of freedom
double t10_density(double x) {
    static const double log_norm =
        std::lgamma(5.5) - std::lgamma(5.0) - 0.5 * std::log(10.0 * M_PI);
    return std::exp(log_norm - 5.5 * std::log1p(x * x / 10.0));
}

bool index_scenario(char sc) { return sc == 'C' || sc == 'D'; }

// grouping-order source columns for the index scenarios: E_1 takes exposures
// (1, 11, 12, 13), E_2 takes (2, 14, 15, 16), the rest stay singletons
constexpr int kIndexOrder[16] = {0, 10, 11, 12, 1, 13, 14, 15, 2, 3, 4, 5, 6, 7, 8, 9};

FitMetrics average_metrics(const std::vector<FitMetrics>& v) {
    FitMetrics m;
    if (v.empty()) return m;
    const double w = 1.0 / static_cast<double>(v.size());
    m.main_pip = Eigen::VectorXd::Zero(v[0].main_pip.size());
    m.kernel_pip = Eigen::VectorXd::Zero(v[0].kernel_pip.size());
    m.joint_pip = Eigen::MatrixXd::Zero(v[0].joint_pip.rows(), v[0].joint_pip.cols());
    m.weight_q50.resize(v[0].weight_q50.size());
    for (size_t j = 0; j < m.weight_q50.size(); ++j)
        m.weight_q50[j].setZero(v[0].weight_q50[j].size());
    for (const FitMetrics& r : v) {
        m.mse += w * r.mse;
        m.bias += w * r.bias;
        m.width += w * r.width;
        m.coverage += w * r.coverage;
        m.all_kernel_off += w * r.all_kernel_off;
        m.main_pip += w * r.main_pip;
        m.kernel_pip += w * r.kernel_pip;
        m.joint_pip += w * r.joint_pip;
        for (size_t j = 0; j < m.weight_q50.size(); ++j) m.weight_q50[j] += w * r.weight_q50[j];
    }
    return m;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    return out;
}

}  // namespace

void ScenarioSpec::validate() const {
    if (scenario < 'A' || scenario > 'D') throw ConfigError("scenario must be one of A, B, C, D");
    if (n < 50) throw ConfigError("scenario size must be at least 50");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    if (replicates < 1) throw ConfigError("replicates must be at least 1");
}

double scenario_mean(char sc, const Eigen::VectorXd& x) {
    if (sc < 'A' || sc > 'D') throw ConfigError("scenario must be one of A, B, C, D");
    const int p = index_scenario(sc) ? 16 : 10;
    if (x.size() != p)
        throw ConfigError("scenario " + std::string(1, sc) + " expects " + std::to_string(p) +
                          " exposures");
    double e1, e2;
    if (index_scenario(sc)) {
        e1 = 3.0 * x[0] + 2.0 * x[10] + x[11];  // the 13th exposure has weight zero
        e2 = x[1] + x[13] + x[14] + x[15];
    } else {
        e1 = x[0];
        e2 = x[1];
    }
    double mu = 2.0 * std::cos(2.0 * e1) + e2 + 4.0 * t10_density(2.0 * x[2]) +
                std::sin(2.0 * x[3]) + x[4] * x[4] - x[5];
    if (sc == 'B' || sc == 'D') mu += std::cos(2.0 * e1) * x[4] * x[4];
    return mu;
}

GeneratedData generate_scenario(const ScenarioSpec& spec, Rng& rng) {
    spec.validate();
    const bool idx = index_scenario(spec.scenario);
    const int p = idx ? 16 : 10;
    const int n = spec.n;
    const double s3 = std::sqrt(3.0);

    Eigen::MatrixXd raw(n, p);
    Eigen::MatrixXd conf(n, 2);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) raw(i, k) = rng.uniform(-s3, s3);
        conf(i, 0) = rng.normal();
        conf(i, 1) = rng.normal();
    }
    Eigen::VectorXd truth(n), y(n);
    const double sd = std::sqrt(spec.sigma2);
    for (int i = 0; i < n; ++i) {
        truth[i] = scenario_mean(spec.scenario, raw.row(i).transpose());
        y[i] = truth[i] + 0.5 * conf(i, 0) + sd * rng.normal();
    }

    Eigen::MatrixXd X(n, p);
    std::vector<std::string> names(p);
    std::vector<std::pair<std::string, std::string>> rows;
    for (int c = 0; c < p; ++c) {
        const int src = idx ? kIndexOrder[c] : c;
        X.col(c) = raw.col(src);
        names[c] = "x" + std::to_string(src + 1);
        const int grp = !idx ? c : (c < 4 ? 0 : (c < 8 ? 1 : c - 6));
        rows.emplace_back(names[c], "E" + std::to_string(grp + 1));
    }

    GeneratedData out;
    out.data = build_dataset(y, X, names, conf, {"z1", "z2"}, GroupingSpec::from_rows(rows));
    out.truth = std::move(truth);
    out.raw = std::move(raw);
    return out;
}

GeneratedData generate_replicate(const ScenarioSpec& spec, int replicate) {
    Rng rng(replicate_seed(spec.seed, replicate));
    return generate_scenario(spec, rng);
}

FitMetrics evaluate_fit(const PosteriorDraws& draws, const Eigen::VectorXd& truth,
                        const ExposureDataset& data, const SplineSystem& splines,
                        const GppKnots& knots, const Hyper& hyper) {
    if (truth.size() != data.n()) throw ConfigError("truth length does not match the dataset");
    if (draws.names != draw_names(data, splines))
        throw ConfigError("draw columns do not match this dataset and basis");
    const Eigen::Index R = draws.n_draws();
    if (R == 0) throw ConfigError("no draws to evaluate");
    const int n = data.n();

    QueryRows query;
    query.groups = data.groups;
    Eigen::MatrixXd S = predict_surface(draws, data, splines, knots, hyper, query);
    for (Eigen::Index r = 0; r < R; ++r) S.row(r).array() -= S.row(r).mean();
    const Eigen::VectorXd tc = truth.array() - truth.mean();

    FitMetrics m;
    std::vector<double> col(static_cast<size_t>(R));
    int covered = 0;
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index r = 0; r < R; ++r) col[static_cast<size_t>(r)] = S(r, i);
        const double mean = S.col(i).mean();
        const double lo = sample_quantile(col, 0.025);
        const double hi = sample_quantile(col, 0.975);
        m.mse += (mean - tc[i]) * (mean - tc[i]) / n;
        m.bias += (mean - tc[i]) / n;
        m.width += (hi - lo) / n;
        if (lo <= tc[i] && tc[i] <= hi) ++covered;
    }
    m.coverage = static_cast<double>(covered) / n;

    const PipSummary pips = compute_pips(draws);
    m.main_pip = pips.main;
    m.kernel_pip = pips.kernel;
    m.joint_pip = pips.joint;

    m.weight_q50.resize(static_cast<size_t>(data.n_groups()));
    for (int j = 0; j < data.n_groups(); ++j)
        m.weight_q50[static_cast<size_t>(j)].setZero(data.group_size(j));
    for (const WeightSummary& w : weight_summaries(draws, data))
        m.weight_q50[static_cast<size_t>(w.group)][w.component] = w.q50;

    const int M = data.n_groups();
    int off0 = -1;
    for (size_t c = 0; c < draws.names.size(); ++c)
        if (draws.names[c] == "gammarho.1") {
            off0 = static_cast<int>(c);
            break;
        }
    int quiet = 0;
    for (Eigen::Index r = 0; r < R; ++r)
        if (draws.draws.row(r).segment(off0, M).sum() == 0.0) ++quiet;
    m.all_kernel_off = static_cast<double>(quiet) / static_cast<double>(R);
    return m;
}

std::vector<BenchmarkRow> run_benchmark(const ScenarioSpec& spec, const std::vector<Mode>& modes,
                                        const BenchmarkConfig& config) {
    spec.validate();
    if (modes.empty()) throw ConfigError("no modes requested");

    std::vector<BenchmarkRow> rows(modes.size());
    for (size_t i = 0; i < modes.size(); ++i) {
        rows[i].mode = modes[i];
        rows[i].replicates.resize(spec.replicates);
    }

    // replicates are independent given their derived seeds, so workers just
    // claim indices; every slot is written exactly once
    std::atomic<int> next{0};
    std::mutex fail_mu;
    std::exception_ptr failure;

    const auto worker = [&]() {
        try {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= spec.replicates) return;
                const std::uint64_t rep_seed = replicate_seed(spec.seed, r);
                const GeneratedData gen = generate_replicate(spec, r);

                Hyper base;
                base.df = config.df;
                base.n_knots = config.n_knots;
                const SplineSystem splines = build_spline_system(gen.data, base.df);
                const GppKnots knots =
                    select_knots(gen.data, base.knots_for(gen.data.n()), knots_seed(rep_seed));

                for (size_t i = 0; i < modes.size(); ++i) {
                    Hyper h = base;
                    h.mode = modes[i];
                    h.validate();
                    ChainConfig cfg = config.chain;
                    cfg.seed = rep_seed;
                    const PosteriorDraws draws = run_chain(gen.data, splines, knots, h, cfg);
                    rows[i].replicates[r] =
                        evaluate_fit(draws, gen.truth, gen.data, splines, knots, h);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mu);
            if (!failure) failure = std::current_exception();
        }
    };

    const int T = std::min(std::max(1, config.threads), spec.replicates);
    if (T == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(T);
        for (int t = 0; t < T; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (BenchmarkRow& row : rows) row.mean = average_metrics(row.replicates);
    return rows;
}

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
    std::ofstream out = open_out(path);
    out << "method,mse,bias,width,coverage,all_kernel_off\n";
    for (const BenchmarkRow& row : rows)
        out << mode_name(row.mode) << ',' << format_double(row.mean.mse) << ','
            << format_double(row.mean.bias) << ',' << format_double(row.mean.width) << ','
            << format_double(row.mean.coverage) << ',' << format_double(row.mean.all_kernel_off)
            << '\n';
}

void write_pip_heat_csv(const std::string& path, const std::vector<BenchmarkRow>& rows,
                        const std::vector<std::string>& group_names) {
    std::ofstream out = open_out(path);
    out << "method,group_j,group_k,pip\n";
    for (const BenchmarkRow& row : rows) {
        const Eigen::Index M = row.mean.main_pip.size();
        if (static_cast<Eigen::Index>(group_names.size()) != M)
            throw ConfigError("group name count does not match the PIP table");
        for (Eigen::Index j = 0; j < M; ++j)
            for (Eigen::Index k = 0; k < M; ++k) {
                const double v = j == k ? row.mean.main_pip[j] : row.mean.joint_pip(j, k);
                out << mode_name(row.mode) << ',' << group_names[j] << ',' << group_names[k] << ','
                    << format_double(v) << '\n';
            }
    }
}

void write_metrics_raw_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
    std::ofstream out = open_out(path);
    out << "method,replicate,mse,bias,width,coverage,all_kernel_off\n";
    for (const BenchmarkRow& row : rows)
        for (size_t r = 0; r < row.replicates.size(); ++r) {
            const FitMetrics& m = row.replicates[r];
            out << mode_name(row.mode) << ',' << r << ',' << format_double(m.mse) << ','
                << format_double(m.bias) << ',' << format_double(m.width) << ','
                << format_double(m.coverage) << ',' << format_double(m.all_kernel_off) << '\n';
        }
}

ExposureDataset generate_helix_shaped(int n, std::uint64_t seed) {
    if (n < 50) throw ConfigError("n must be at least 50");
    const int sizes[13] = {4, 5, 4, 9, 3, 2, 8, 4, 2, 5, 7, 10, 2};
    const int p = 65, q = 9;

    Rng rng(seed);
    Eigen::MatrixXd X(n, p), C(n, q);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) X(i, k) = rng.normal();
        for (int k = 0; k < q; ++k) C(i, k) = rng.normal();
    }
    // sparse planted structure: the first two groups drive the outcome
    // through equal-weight indices, everything else is noise
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double e1 = X.row(i).segment(0, 4).sum() / 2.0;
        const double e2 = X.row(i).segment(4, 5).sum() / std::sqrt(5.0);
        y[i] = 2.0 * std::sin(1.2 * e1) + e2 + 0.4 * e2 * e2 + 0.3 * C(i, 0) + rng.normal();
    }

    std::vector<std::string> names;
    std::vector<std::pair<std::string, std::string>> rows;
    for (int m = 0; m < 13; ++m) {
        char g[16];
        std::snprintf(g, sizeof(g), "class%02d", m + 1);
        for (int l = 0; l < sizes[m]; ++l) {
            names.push_back(std::string(g) + "_e" + std::to_string(l + 1));
            rows.emplace_back(names.back(), g);
        }
    }
    std::vector<std::string> conf_names;
    for (int k = 0; k < q; ++k) conf_names.push_back("z" + std::to_string(k + 1));

    return build_dataset(y, X, names, C, conf_names, GroupingSpec::from_rows(rows));
}

void write_dataset_csv(const ExposureDataset& data, const std::string& data_path,
                       const std::string& groups_path) {
    const int n = data.n();
    std::vector<std::string> cols;
    cols.push_back("y");
    for (int m = 0; m < data.n_groups(); ++m)
        for (const std::string& c : data.component_names[m]) cols.push_back(c);
    for (const std::string& c : data.confounder_names) cols.push_back(c);

    Eigen::MatrixXd V(n, static_cast<Eigen::Index>(cols.size()));
    V.col(0) = data.y;
    Eigen::Index at = 1;
    for (int m = 0; m < data.n_groups(); ++m)
        for (int l = 0; l < data.group_size(m); ++l) V.col(at++) = data.groups[m].col(l);
    for (Eigen::Index c = 1; c < data.Z.cols(); ++c) V.col(at++) = data.Z.col(c);
    write_csv(data_path, cols, V);

    std::ofstream out = open_out(groups_path);
    out << "component,group\n";
    for (int m = 0; m < data.n_groups(); ++m)
        for (const std::string& c : data.component_names[m]) out << c << ',' << data.group_names[m]
                                                                 << '\n';
}

}  // namespace ckmr
