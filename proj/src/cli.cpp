#include "ckmr/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <tuple>

#include "ckmr/csv.hpp"
#include "ckmr/dataset.hpp"
#include "ckmr/errors.hpp"
#include "ckmr/plots.hpp"
#include "ckmr/sampler.hpp"
#include "ckmr/simulation.hpp"
#include "ckmr/summaries.hpp"
#include "ckmr/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ckmr {

namespace {

struct FitArgs {
    std::string data, groups, outcome = "y", mode = "ckmr", out;
    std::vector<std::string> confounders;
    ChainConfig chain;
    int knots = -1, df = 9, threads = 0;
    bool plot = false;
};

struct SimArgs {
    std::string scenario = "A", out;
    std::vector<std::string> modes = {"ckmr", "kernel-only"};
    int reps = 50, n = 200, knots = 50, df = 9, threads = 0;
    double sigma2 = 1.0;
    std::uint64_t seed = 1;
    int iters = 3000, burnin = 1500, thin = 3, chains = 1;
    bool plot = false;
};

struct SumArgs {
    std::string dir, out;
    bool plot = false;
};

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string chain_file(int chain) { return "draws_chain" + std::to_string(chain + 1) + ".csv"; }

/*  Multi-chain fit with optional worker threads.  Chain c of a C-chain run
    is seeded with base + stride*(c+1), which equals chain 0 of a one-chain
    run whose base seed is shifted by stride*c; workers exploit that identity
    so threaded and sequential runs emit identical draws.  */
PosteriorDraws fit_chains(const ExposureDataset& data, const SplineSystem& splines,
                          const GppKnots& knots, const Hyper& hyper, const ChainConfig& cfg,
                          int threads) {
    const int T = std::min(std::max(1, threads), cfg.chains);
    if (T <= 1) return run_chain(data, splines, knots, hyper, cfg);

    std::vector<PosteriorDraws> parts(cfg.chains);
    std::atomic<int> next{0};
    std::mutex fail_mu;
    std::exception_ptr failure;
    const auto worker = [&]() {
        try {
            for (;;) {
                const int c = next.fetch_add(1);
                if (c >= cfg.chains) return;
                ChainConfig one = cfg;
                one.chains = 1;
                one.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(c);
                parts[c] = run_chain(data, splines, knots, hyper, one);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mu);
            if (!failure) failure = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    PosteriorDraws out;
    out.names = parts[0].names;
    Eigen::Index rows = 0;
    for (const PosteriorDraws& p : parts) rows += p.draws.rows();
    out.draws.resize(rows, parts[0].draws.cols());
    Eigen::Index at = 0;
    for (int c = 0; c < cfg.chains; ++c) {
        out.draws.middleRows(at, parts[c].draws.rows()) = parts[c].draws;
        for (int r = 0; r < parts[c].n_draws(); ++r) {
            out.chain_ids.push_back(c);
            out.iteration_ids.push_back(parts[c].iteration_ids[r]);
        }
        out.diagnostics.push_back(parts[c].diagnostics[0]);
        at += parts[c].draws.rows();
    }
    return out;
}

void write_draws_csv(const fs::path& dir, const PosteriorDraws& draws, int chains) {
    std::vector<std::string> cols;
    cols.push_back("iteration");
    cols.insert(cols.end(), draws.names.begin(), draws.names.end());
    for (int c = 0; c < chains; ++c) {
        Eigen::Index count = 0;
        for (int id : draws.chain_ids) count += id == c;
        Eigen::MatrixXd m(count, draws.draws.cols() + 1);
        Eigen::Index at = 0;
        for (int r = 0; r < draws.n_draws(); ++r)
            if (draws.chain_ids[r] == c) {
                m(at, 0) = draws.iteration_ids[r];
                m.row(at).tail(draws.draws.cols()) = draws.draws.row(r);
                ++at;
            }
        write_csv((dir / chain_file(c)).string(), cols, m);
    }
}

PosteriorDraws read_draws_csv(const std::vector<fs::path>& paths) {
    PosteriorDraws out;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index rows = 0;
    for (size_t idx = 0; idx < paths.size(); ++idx) {
        const CsvTable t = read_csv(paths[idx].string());
        if (t.columns.empty() || t.columns[0] != "iteration")
            throw ParseError("draw file lacks the iteration column: " + paths[idx].string());
        const std::vector<std::string> names(t.columns.begin() + 1, t.columns.end());
        if (idx == 0)
            out.names = names;
        else if (names != out.names)
            throw ParseError("draw files disagree on columns: " + paths[idx].string());
        for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
            out.chain_ids.push_back(static_cast<int>(idx));
            out.iteration_ids.push_back(static_cast<int>(t.values(r, 0)));
        }
        blocks.push_back(t.values.rightCols(t.values.cols() - 1));
        rows += t.values.rows();
    }
    out.draws.resize(rows, static_cast<Eigen::Index>(out.names.size()));
    Eigen::Index at = 0;
    for (const Eigen::MatrixXd& b : blocks) {
        out.draws.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    out.diagnostics.resize(paths.size());
    return out;
}

ordered_json hyper_json(const Hyper& h, int n_knots_used) {
    ordered_json j;
    j["a_pi"] = h.a_pi;
    j["b_pi"] = h.b_pi;
    j["a_rho"] = h.a_rho;
    j["b_rho"] = h.b_rho;
    j["a_pi_rho"] = h.a_pi_rho;
    j["b_pi_rho"] = h.b_pi_rho;
    j["a_tau"] = h.a_tau;
    j["b_tau"] = h.b_tau;
    j["a_star"] = h.a_star;
    j["b_star"] = h.b_star;
    j["a_sigma"] = h.a_sigma;
    j["b_sigma"] = h.b_sigma;
    j["kappa"] = h.kappa;
    j["kappa_prop"] = h.kappa_prop;
    j["jump_s"] = h.jump_s;
    j["a_phi"] = h.a_phi;
    j["df"] = h.df;
    j["n_knots"] = h.n_knots;
    j["n_knots_used"] = n_knots_used;
    j["polar"] = h.polar;
    j["mode"] = mode_name(h.mode);
    return j;
}

Hyper hyper_from_json(const ordered_json& j) {
    Hyper h;
    h.a_pi = j.at("a_pi");
    h.b_pi = j.at("b_pi");
    h.a_rho = j.at("a_rho");
    h.b_rho = j.at("b_rho");
    h.a_pi_rho = j.at("a_pi_rho");
    h.b_pi_rho = j.at("b_pi_rho");
    h.a_tau = j.at("a_tau");
    h.b_tau = j.at("b_tau");
    h.a_star = j.at("a_star");
    h.b_star = j.at("b_star");
    h.a_sigma = j.at("a_sigma");
    h.b_sigma = j.at("b_sigma");
    h.kappa = j.at("kappa");
    h.kappa_prop = j.at("kappa_prop");
    h.jump_s = j.at("jump_s");
    h.a_phi = j.at("a_phi");
    h.df = j.at("df");
    h.n_knots = j.at("n_knots");
    h.polar = j.at("polar");
    h.mode = parse_mode(j.at("mode"));
    h.validate();
    return h;
}

// Interaction files stay bounded: pairs with joint kernel PIP over the
// threshold, strongest first, at most `cap` of them.
std::vector<std::pair<int, int>> select_pairs(const PipSummary& pips, double threshold = 0.10,
                                              int cap = 5) {
    std::vector<std::tuple<double, int, int>> ranked;
    const Eigen::Index M = pips.main.size();
    for (Eigen::Index j = 0; j < M; ++j)
        for (Eigen::Index k = j + 1; k < M; ++k)
            if (pips.joint(j, k) >= threshold)
                ranked.emplace_back(-pips.joint(j, k), static_cast<int>(j), static_cast<int>(k));
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::pair<int, int>> out;
    for (const auto& [neg, j, k] : ranked) {
        if (static_cast<int>(out.size()) >= cap) break;
        out.emplace_back(j, k);
    }
    return out;
}

struct SummaryFiles {
    std::vector<std::string> files;
    std::vector<std::pair<int, int>> pairs;
};

SummaryFiles write_summary_outputs(const fs::path& dir, const PosteriorDraws& draws,
                                   const ExposureDataset& data, const SplineSystem& splines,
                                   const GppKnots& knots, const Hyper& hyper, bool plot) {
    SummaryFiles out;
    const PipSummary pips = compute_pips(draws);
    write_pips_csv((dir / "pips.csv").string(), pips, data.group_names);
    out.files.push_back("pips.csv");

    const std::vector<CurveGrid> curves = indexwise_curves(draws, data, splines, knots, hyper);
    write_curves_csv((dir / "curves.csv").string(), curves, data.group_names);
    out.files.push_back("curves.csv");

    out.pairs = select_pairs(pips);
    std::vector<InteractionFamily> families;
    for (const auto& [j, k] : out.pairs)
        families.push_back(interaction_curve_family(draws, data, splines, knots, hyper, j, k));
    write_interactions_csv((dir / "interactions.csv").string(), families, data.group_names);
    out.files.push_back("interactions.csv");

    write_weights_csv((dir / "weights.csv").string(), weight_summaries(draws, data), data);
    out.files.push_back("weights.csv");

    if (plot) {
        write_curves_svg((dir / "curves.svg").string(), curves, data.group_names);
        write_pip_heat_svg((dir / "pips.svg").string(), pips.main, pips.joint, data.group_names);
        out.files.push_back("curves.svg");
        out.files.push_back("pips.svg");
    }
    return out;
}

ordered_json conventions_json() {
    return ordered_json{
        {"surface",
         "confounder and intercept contributions excluded; every draw's surface is centered over "
         "the evaluation rows before averaging"},
        {"curves",
         "grid spans the 1-99 percentile range of the training index along the "
         "inclusion-conditional mean weight direction; bands are pointwise 2.5/97.5 quantiles"},
        {"interactions",
         "curve families for pairs with joint kernel PIP >= 0.1 (at most five, strongest first); "
         "the pinned index sits at its 10/50/90th percentile, all others at their median"},
        {"weights", "weight quantiles condition on index inclusion; rows with n_included = 0 fall "
                    "back to all draws"},
        {"seeds", "chain c runs on seed + 1000003*(c+1); replicate r on seed + r; knot selection "
                  "on seed XOR 0x9e3779b97f4a7c15"}};
}

ordered_json acceptance_json(const std::vector<MoveDiagnostics>& diags) {
    ordered_json arr = ordered_json::array();
    for (size_t c = 0; c < diags.size(); ++c) {
        const MoveDiagnostics& d = diags[c];
        ordered_json j;
        j["chain"] = c + 1;
        j["between"] = {{"proposed", d.between_proposed}, {"accepted", d.between_accepted}};
        j["refine"] = {{"proposed", d.refine_proposed}, {"accepted", d.refine_accepted}};
        j["rho"] = {{"proposed", d.rho_proposed}, {"accepted", d.rho_accepted}};
        j["nu2"] = {{"proposed", d.nu2_proposed}, {"accepted", d.nu2_accepted}};
        j["forced_rejections"] = d.forced_rejections;
        arr.push_back(j);
    }
    return arr;
}

void write_json(const fs::path& path, const ordered_json& js) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path.string());
    out << js.dump(2) << '\n';
}

int cmd_fit(const FitArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    a.chain.validate();

    const GroupingSpec grouping = GroupingSpec::from_rows(read_grouping_csv(a.groups));
    const ExposureDataset data = load_dataset(a.data, grouping, a.outcome, a.confounders);

    Hyper h;
    h.df = a.df;
    h.n_knots = a.knots;
    h.mode = parse_mode(a.mode);
    h.validate();

    const SplineSystem splines = build_spline_system(data, h.df);
    const std::uint64_t kseed = knots_seed(a.chain.seed);
    const int n1 = h.knots_for(data.n());
    const GppKnots knots = select_knots(data, n1, kseed);

    const PosteriorDraws draws =
        fit_chains(data, splines, knots, h, a.chain, resolve_threads(a.threads));

    fs::create_directories(a.out);
    const fs::path dir = a.out;
    write_draws_csv(dir, draws, a.chain.chains);
    const SummaryFiles summaries = write_summary_outputs(dir, draws, data, splines, knots, h,
                                                         a.plot);

    ordered_json js;
    js["version"] = kVersion;
    js["command"] = "fit";
    js["mode"] = mode_name(h.mode);
    std::vector<int> sizes(data.n_groups());
    for (int m = 0; m < data.n_groups(); ++m) sizes[m] = data.group_size(m);
    js["data"] = {{"path", a.data},          {"groups_path", a.groups},
                  {"outcome", a.outcome},    {"confounders", a.confounders},
                  {"n", data.n()},           {"group_names", data.group_names},
                  {"group_sizes", sizes}};
    js["hyper"] = hyper_json(h, n1);
    std::vector<std::uint64_t> chain_seeds(a.chain.chains);
    for (int c = 0; c < a.chain.chains; ++c) chain_seeds[c] = chain_seed(a.chain.seed, c);
    js["chain"] = {{"iterations", a.chain.iterations}, {"burn_in", a.chain.burn_in},
                   {"thin", a.chain.thin},             {"chains", a.chain.chains},
                   {"seed", a.chain.seed},             {"chain_seeds", chain_seeds},
                   {"knots_seed", kseed}};
    std::vector<std::string> draw_files(a.chain.chains);
    for (int c = 0; c < a.chain.chains; ++c) draw_files[c] = chain_file(c);
    js["draws"] = {{"files", draw_files}, {"total", draws.n_draws()}};
    js["acceptance"] = acceptance_json(draws.diagnostics);
    ordered_json pair_names = ordered_json::array();
    for (const auto& [j, k] : summaries.pairs)
        pair_names.push_back({data.group_names[j], data.group_names[k]});
    js["interaction_pairs"] = pair_names;
    js["outputs"] = summaries.files;
    js["conventions"] = conventions_json();
    js["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(dir / "summary.json", js);
    return 0;
}

int cmd_simulate(const SimArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    if (a.scenario.size() != 1) throw ConfigError("scenario must be one of A, B, C, D");

    ScenarioSpec spec;
    spec.scenario = a.scenario[0];
    spec.n = a.n;
    spec.sigma2 = a.sigma2;
    spec.seed = a.seed;
    spec.replicates = a.reps;
    spec.validate();

    std::vector<Mode> modes;
    for (const std::string& m : a.modes) modes.push_back(parse_mode(m));

    BenchmarkConfig cfg;
    cfg.chain.iterations = a.iters;
    cfg.chain.burn_in = a.burnin;
    cfg.chain.thin = a.thin;
    cfg.chain.chains = a.chains;
    cfg.chain.validate();
    cfg.n_knots = a.knots;
    cfg.df = a.df;
    cfg.threads = resolve_threads(a.threads);

    const std::vector<BenchmarkRow> rows = run_benchmark(spec, modes, cfg);
    const std::vector<std::string> group_names = generate_replicate(spec, 0).data.group_names;

    fs::create_directories(a.out);
    const fs::path dir = a.out;
    write_benchmark_csv((dir / "benchmark.csv").string(), rows);
    write_pip_heat_csv((dir / "pip_heat.csv").string(), rows, group_names);
    write_metrics_raw_csv((dir / "metrics_raw.csv").string(), rows);
    std::vector<std::string> outputs = {"benchmark.csv", "pip_heat.csv", "metrics_raw.csv"};
    if (a.plot)
        for (const BenchmarkRow& row : rows) {
            const std::string f = "pip_heat_" + mode_name(row.mode) + ".svg";
            write_pip_heat_svg((dir / f).string(), row.mean.main_pip, row.mean.joint_pip,
                               group_names);
            outputs.push_back(f);
        }

    ordered_json js;
    js["version"] = kVersion;
    js["command"] = "simulate";
    js["scenario"] = a.scenario;
    js["replicates"] = spec.replicates;
    js["n"] = spec.n;
    js["sigma2"] = spec.sigma2;
    js["seed"] = spec.seed;
    ordered_json mode_list = ordered_json::array();
    for (Mode m : modes) mode_list.push_back(mode_name(m));
    js["modes"] = mode_list;
    js["chain"] = {{"iterations", cfg.chain.iterations},
                   {"burn_in", cfg.chain.burn_in},
                   {"thin", cfg.chain.thin},
                   {"chains", cfg.chain.chains}};
    js["df"] = cfg.df;
    js["n_knots"] = cfg.n_knots;
    js["threads"] = cfg.threads;
    js["outputs"] = outputs;
    js["conventions"] = conventions_json();
    js["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(dir / "summary.json", js);
    return 0;
}

int cmd_summarize(const SumArgs& a) {
    const fs::path dir = a.dir;
    std::ifstream in(dir / "summary.json");
    if (!in) {
        std::cerr << "error: no summary.json in " << a.dir << "\n";
        return 2;
    }
    ordered_json js;
    in >> js;
    if (js.at("command") != "fit")
        throw ConfigError("summarize expects the output directory of a fit run");

    const ordered_json& jd = js.at("data");
    const GroupingSpec grouping =
        GroupingSpec::from_rows(read_grouping_csv(jd.at("groups_path")));
    const ExposureDataset data = load_dataset(jd.at("path"), grouping, jd.at("outcome"),
                                              jd.at("confounders"));

    const Hyper h = hyper_from_json(js.at("hyper"));
    const SplineSystem splines = build_spline_system(data, h.df);
    const GppKnots knots =
        select_knots(data, js.at("hyper").at("n_knots_used"), js.at("chain").at("knots_seed"));

    std::vector<fs::path> present;
    for (const std::string& f : js.at("draws").at("files")) {
        if (fs::exists(dir / f))
            present.push_back(dir / f);
        else
            std::cerr << "warning: draw file " << f << " is missing, summarizing without it\n";
    }
    if (present.empty()) {
        std::cerr << "error: no draw files found in " << a.dir << "\n";
        return 2;
    }

    const PosteriorDraws draws = read_draws_csv(present);
    if (draws.names != draw_names(data, splines))
        throw ConfigError("draw files do not match the recorded dataset and basis");

    const fs::path out_dir = a.out.empty() ? dir : fs::path(a.out);
    fs::create_directories(out_dir);
    write_summary_outputs(out_dir, draws, data, splines, knots, h, a.plot);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Collapsible kernel machine regression for grouped exposures"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML config file; command-line flags take precedence");

    FitArgs f;
    CLI::App* fit = app.add_subcommand("fit", "Fit the model to a CSV dataset");
    fit->add_option("--data", f.data, "data CSV with outcome, exposures, confounders")
        ->required();
    fit->add_option("--groups", f.groups, "component,group map CSV")->required();
    fit->add_option("--outcome", f.outcome, "outcome column")->capture_default_str();
    fit->add_option("--confounders", f.confounders, "confounder columns, comma separated")
        ->delimiter(',');
    fit->add_option("--mode", f.mode, "ckmr | nonadaptive | kernel-only")
        ->check(CLI::IsMember({"ckmr", "nonadaptive", "kernel-only"}))
        ->capture_default_str();
    fit->add_option("--iters", f.chain.iterations, "sweeps per chain")->capture_default_str();
    fit->add_option("--burnin", f.chain.burn_in, "discarded sweeps")->capture_default_str();
    fit->add_option("--thin", f.chain.thin, "keep every k-th sweep")->capture_default_str();
    fit->add_option("--chains", f.chain.chains, "independent chains")->capture_default_str();
    fit->add_option("--seed", f.chain.seed, "base seed, all streams derive from it")
        ->capture_default_str();
    fit->add_option("--knots", f.knots, "kernel approximation knots (-1: min(100, N))")
        ->capture_default_str();
    fit->add_option("--df", f.df, "spline basis dimension per index")->capture_default_str();
    fit->add_option("--threads", f.threads, "chain workers (0: all cores)")
        ->capture_default_str();
    fit->add_flag("--plot", f.plot, "emit SVG renderings of curves and PIPs");
    fit->add_option("--out", f.out, "output directory")->required();

    SimArgs s;
    CLI::App* sim = app.add_subcommand("simulate", "Run a synthetic benchmark");
    sim->add_option("--scenario", s.scenario, "A | B | C | D")->capture_default_str();
    sim->add_option("--reps", s.reps, "replicates")->capture_default_str();
    sim->add_option("--n", s.n, "observations per replicate")->capture_default_str();
    sim->add_option("--sigma2", s.sigma2, "noise variance")->capture_default_str();
    sim->add_option("--modes", s.modes, "modes to compare, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    sim->add_option("--seed", s.seed, "base seed")->capture_default_str();
    sim->add_option("--iters", s.iters, "sweeps per fit")->capture_default_str();
    sim->add_option("--burnin", s.burnin, "discarded sweeps")->capture_default_str();
    sim->add_option("--thin", s.thin, "keep every k-th sweep")->capture_default_str();
    sim->add_option("--chains", s.chains, "chains per fit")->capture_default_str();
    sim->add_option("--knots", s.knots, "kernel approximation knots")->capture_default_str();
    sim->add_option("--df", s.df, "spline basis dimension per index")->capture_default_str();
    sim->add_option("--threads", s.threads, "replicate workers (0: all cores)")
        ->capture_default_str();
    sim->add_flag("--plot", s.plot, "emit SVG heat tables");
    sim->add_option("--out", s.out, "output directory")->required();

    SumArgs u;
    CLI::App* sum = app.add_subcommand("summarize", "Recompute summaries from saved draws");
    sum->add_option("--dir", u.dir, "fit output directory")->required();
    sum->add_option("--out", u.out, "destination (default: --dir)");
    sum->add_flag("--plot", u.plot, "emit SVG renderings");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*fit) return cmd_fit(f);
        if (*sim) return cmd_simulate(s);
        return cmd_summarize(u);
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ordered_json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace ckmr
