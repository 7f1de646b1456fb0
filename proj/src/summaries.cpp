#include "ckmr/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "ckmr/engine.hpp"
#include "ckmr/errors.hpp"

namespace ckmr {

namespace {

std::unordered_map<std::string, int> name_index(const PosteriorDraws& draws) {
    std::unordered_map<std::string, int> at;
    for (size_t c = 0; c < draws.names.size(); ++c) at.emplace(draws.names[c], static_cast<int>(c));
    return at;
}

int column_of(const std::unordered_map<std::string, int>& at, const std::string& name) {
    const auto it = at.find(name);
    if (it == at.end()) throw ConfigError("draw column '" + name + "' missing from the header");
    return it->second;
}

int count_groups(const PosteriorDraws& draws) {
    int m = 0;
    for (const std::string& n : draws.names)
        if (n.rfind("gamma.", 0) == 0) ++m;
    return m;
}

void require_draws(const PosteriorDraws& draws) {
    if (draws.n_draws() == 0) throw ConfigError("empty draw set");
}

// Inclusion-conditional posterior-mean directions, renormalized; an index no
// draw includes keeps the frozen direction the draws all share.
std::vector<Eigen::VectorXd> mean_directions(const PosteriorDraws& draws,
                                             const ExposureDataset& data) {
    const auto at = name_index(draws);
    std::vector<Eigen::VectorXd> hat(data.n_groups());
    for (int m = 0; m < data.n_groups(); ++m) {
        const int L = data.group_size(m);
        const int gcol = column_of(at, "gamma." + std::to_string(m + 1));
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(L);
        long long used = 0;
        for (int pass = 0; pass < 2 && used == 0; ++pass) {
            for (int r = 0; r < draws.n_draws(); ++r) {
                if (pass == 0 && draws.draws(r, gcol) == 0.0) continue;
                for (int l = 0; l < L; ++l)
                    sum[l] += draws.draws(r, column_of(at, "theta." + std::to_string(m + 1) + "." +
                                                               std::to_string(l + 1)));
                ++used;
            }
        }
        const double norm = sum.norm();
        hat[m] = norm > 0 ? Eigen::VectorXd(sum / norm) : equal_weights(L);
    }
    return hat;
}

struct IndexScale {
    Eigen::VectorXd grid;  // n_grid points, 1st to 99th percentile
    double median = 0.0;
};

IndexScale index_scale(const ExposureDataset& data, int m, const Eigen::VectorXd& theta_hat,
                       int n_grid) {
    const Eigen::VectorXd v = data.groups[m] * theta_hat;
    std::vector<double> vals(v.data(), v.data() + v.size());
    IndexScale out;
    out.median = sample_quantile(vals, 0.5);
    const double lo = sample_quantile(vals, 0.01), hi = sample_quantile(vals, 0.99);
    out.grid.resize(n_grid);
    for (int q = 0; q < n_grid; ++q)
        out.grid[q] = n_grid == 1 ? lo : lo + (hi - lo) * q / (n_grid - 1.0);
    return out;
}

// Query block varying index `vary` over `grid` with every other index pinned:
// group exposures are value * theta_hat, so the index value is the value.
void append_query_block(QueryRows& query, const ExposureDataset& data,
                        const std::vector<Eigen::VectorXd>& hat,
                        const std::vector<IndexScale>& scale, int vary,
                        const Eigen::VectorXd& grid, double pinned_value, int pinned) {
    const int g = static_cast<int>(grid.size());
    const int base = query.n();
    for (int m = 0; m < data.n_groups(); ++m) {
        query.groups[m].conservativeResize(base + g, data.group_size(m));
        for (int q = 0; q < g; ++q) {
            double value = scale[m].median;
            if (m == vary) value = grid[q];
            if (m == pinned) value = pinned_value;
            query.groups[m].row(base + q) = value * hat[m].transpose();
        }
    }
}

CurveGrid summarize_block(const Eigen::MatrixXd& surf, int offset, int n_grid, int index,
                          const Eigen::VectorXd& grid) {
    Eigen::MatrixXd block = surf.middleCols(offset, n_grid);
    block.colwise() -= block.rowwise().mean();

    CurveGrid out;
    out.index = index;
    out.grid = grid;
    out.mean = block.colwise().mean();
    out.lo.resize(n_grid);
    out.hi.resize(n_grid);
    for (int q = 0; q < n_grid; ++q) {
        std::vector<double> col(block.col(q).data(), block.col(q).data() + block.rows());
        out.lo[q] = sample_quantile(col, 0.025);
        out.hi[q] = sample_quantile(std::move(col), 0.975);
    }
    return out;
}

void write_row(std::ofstream& out, std::initializer_list<double> xs) {
    char buf[32];
    for (double x : xs) {
        std::snprintf(buf, sizeof buf, ",%.10g", x);
        out << buf;
    }
    out << "\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

double sample_quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw ConfigError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = p * (static_cast<double>(xs.size()) - 1.0);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

PipSummary compute_pips(const PosteriorDraws& draws) {
    require_draws(draws);
    const auto at = name_index(draws);
    const int M = count_groups(draws);
    const double n = draws.n_draws();

    PipSummary out;
    out.main.resize(M);
    out.kernel.resize(M);
    out.joint.resize(M, M);
    for (int m = 0; m < M; ++m) {
        out.main[m] = draws.draws.col(column_of(at, "gamma." + std::to_string(m + 1))).mean();
        out.kernel[m] = draws.draws.col(column_of(at, "gammarho." + std::to_string(m + 1))).mean();
    }
    for (int j = 0; j < M; ++j) {
        const auto cj = draws.draws.col(column_of(at, "gammarho." + std::to_string(j + 1)));
        for (int k = j + 1; k < M; ++k) {
            const auto ck = draws.draws.col(column_of(at, "gammarho." + std::to_string(k + 1)));
            out.joint(j, k) = out.joint(k, j) = cj.dot(ck) / n;
        }
        out.joint(j, j) = out.kernel[j];
    }
    return out;
}

Eigen::MatrixXd predict_surface(const PosteriorDraws& draws, const ExposureDataset& data,
                                const SplineSystem& splines, const GppKnots& knots,
                                const Hyper& hyper, const QueryRows& query,
                                std::vector<std::string>* warnings) {
    require_draws(draws);
    const int M = data.n_groups();
    if (static_cast<int>(query.groups.size()) != M)
        throw ConfigError("query has " + std::to_string(query.groups.size()) + " groups, data has " +
                          std::to_string(M));
    const int nq = query.n();
    for (int m = 0; m < M; ++m)
        if (query.groups[m].rows() != nq || query.groups[m].cols() != data.group_size(m))
            throw ConfigError("query group '" + data.group_names[m] + "' shape mismatch");

    if (warnings != nullptr) {
        for (int m = 0; m < M; ++m)
            for (int l = 0; l < data.group_size(m); ++l) {
                const double lo = data.groups[m].col(l).minCoeff();
                const double hi = data.groups[m].col(l).maxCoeff();
                const double pad = 0.2 * (hi - lo);
                const double qlo = query.groups[m].col(l).minCoeff();
                const double qhi = query.groups[m].col(l).maxCoeff();
                if (qlo < lo - pad || qhi > hi + pad) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf,
                                  "query values for component %s reach [%.3g, %.3g], outside the "
                                  "training range [%.3g, %.3g] widened 20%%",
                                  data.component_names[m][l].c_str(), qlo, qhi, lo, hi);
                    warnings->push_back(buf);
                }
            }
    }

    const Engine engine(data, splines, knots, hyper);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(draws.n_draws(), nq);
    for (int r = 0; r < draws.n_draws(); ++r) {
        const ModelState s = unflatten_draw(draws.draws.row(r), data, splines);

        if (hyper.mode != Mode::kernel_only)
            for (int m = 0; m < M; ++m)
                if (s.gamma[m] != 0)
                    out.row(r) += (evaluate_basis(splines, m, query.groups[m] * s.kernel.theta[m]) *
                                   s.beta[m])
                                      .transpose();

        // gamma_rho identically zero (or nu2 = 0) makes the kriging term an
        // exact structural zero, not a small number
        if (s.gamma_rho.sum() == 0 || s.nu2 == 0.0) continue;

        const Evaluation ev = engine.evaluate(s);
        const Eigen::VectorXd u = ev.P.apply(ev.factor.apply_inverse(ev.resid));
        const Eigen::VectorXd svec = ev.factor.k11_solve(ev.blocks.k10 * u);
        const Eigen::MatrixXd kq = kernel_matrix(knots.groups, query.groups, s.kernel);
        out.row(r) += s.nu2 * (kq.transpose() * svec).transpose();
    }
    return out;
}

std::vector<CurveGrid> indexwise_curves(const PosteriorDraws& draws, const ExposureDataset& data,
                                        const SplineSystem& splines, const GppKnots& knots,
                                        const Hyper& hyper, int n_grid) {
    require_draws(draws);
    const int M = data.n_groups();
    const std::vector<Eigen::VectorXd> hat = mean_directions(draws, data);
    std::vector<IndexScale> scale;
    scale.reserve(M);
    for (int m = 0; m < M; ++m) scale.push_back(index_scale(data, m, hat[m], n_grid));

    QueryRows query;
    query.groups.assign(M, Eigen::MatrixXd());
    for (int m = 0; m < M; ++m)
        append_query_block(query, data, hat, scale, m, scale[m].grid, 0.0, -1);

    const Eigen::MatrixXd surf = predict_surface(draws, data, splines, knots, hyper, query);
    std::vector<CurveGrid> out;
    out.reserve(M);
    for (int m = 0; m < M; ++m)
        out.push_back(summarize_block(surf, m * n_grid, n_grid, m, scale[m].grid));
    return out;
}

InteractionFamily interaction_curve_family(const PosteriorDraws& draws,
                                           const ExposureDataset& data,
                                           const SplineSystem& splines, const GppKnots& knots,
                                           const Hyper& hyper, int j, int k,
                                           const std::vector<double>& percentiles, int n_grid) {
    require_draws(draws);
    const int M = data.n_groups();
    if (j < 0 || j >= M || k < 0 || k >= M)
        throw ConfigError("interaction indices must name existing groups");
    if (j == k) throw ConfigError("interaction family needs two distinct indices");

    const std::vector<Eigen::VectorXd> hat = mean_directions(draws, data);
    std::vector<IndexScale> scale;
    scale.reserve(M);
    for (int m = 0; m < M; ++m) scale.push_back(index_scale(data, m, hat[m], n_grid));

    const Eigen::VectorXd vk = data.groups[k] * hat[k];
    const std::vector<double> kvals(vk.data(), vk.data() + vk.size());

    QueryRows query;
    query.groups.assign(M, Eigen::MatrixXd());
    for (double pct : percentiles)
        append_query_block(query, data, hat, scale, j, scale[j].grid,
                           sample_quantile(kvals, pct / 100.0), k);

    const Eigen::MatrixXd surf = predict_surface(draws, data, splines, knots, hyper, query);
    InteractionFamily fam;
    fam.j = j;
    fam.k = k;
    fam.percentiles = percentiles;
    for (size_t c = 0; c < percentiles.size(); ++c)
        fam.curves.push_back(
            summarize_block(surf, static_cast<int>(c) * n_grid, n_grid, j, scale[j].grid));
    return fam;
}

std::vector<WeightSummary> weight_summaries(const PosteriorDraws& draws,
                                            const ExposureDataset& data) {
    require_draws(draws);
    const auto at = name_index(draws);
    std::vector<WeightSummary> out;
    for (int m = 0; m < data.n_groups(); ++m) {
        const int gcol = column_of(at, "gamma." + std::to_string(m + 1));
        std::vector<int> rows;
        for (int r = 0; r < draws.n_draws(); ++r)
            if (draws.draws(r, gcol) != 0.0) rows.push_back(r);
        const long long n_included = static_cast<long long>(rows.size());
        if (rows.empty())
            for (int r = 0; r < draws.n_draws(); ++r) rows.push_back(r);

        for (int l = 0; l < data.group_size(m); ++l) {
            const int tcol = column_of(at, "theta." + std::to_string(m + 1) + "." +
                                               std::to_string(l + 1));
            std::vector<double> vals;
            vals.reserve(rows.size());
            for (int r : rows) vals.push_back(draws.draws(r, tcol));
            WeightSummary w;
            w.group = m;
            w.component = l;
            w.n_included = n_included;
            w.q025 = sample_quantile(vals, 0.025);
            w.q50 = sample_quantile(vals, 0.5);
            w.q975 = sample_quantile(std::move(vals), 0.975);
            out.push_back(w);
        }
    }
    return out;
}

void write_pips_csv(const std::string& path, const PipSummary& pips,
                    const std::vector<std::string>& group_names) {
    std::ofstream out = open_out(path);
    out << "group,main,kernel";
    for (const std::string& g : group_names) out << ",joint." << g;
    out << "\n";
    for (size_t m = 0; m < group_names.size(); ++m) {
        out << group_names[m];
        std::vector<double> row = {pips.main[m], pips.kernel[m]};
        for (size_t k = 0; k < group_names.size(); ++k) row.push_back(pips.joint(m, k));
        char buf[32];
        for (double x : row) {
            std::snprintf(buf, sizeof buf, ",%.10g", x);
            out << buf;
        }
        out << "\n";
    }
}

void write_curves_csv(const std::string& path, const std::vector<CurveGrid>& curves,
                      const std::vector<std::string>& group_names) {
    std::ofstream out = open_out(path);
    out << "index,grid,mean,lo,hi\n";
    for (const CurveGrid& c : curves)
        for (int q = 0; q < c.grid.size(); ++q) {
            out << group_names[c.index];
            write_row(out, {c.grid[q], c.mean[q], c.lo[q], c.hi[q]});
        }
}

void write_interactions_csv(const std::string& path,
                            const std::vector<InteractionFamily>& families,
                            const std::vector<std::string>& group_names) {
    std::ofstream out = open_out(path);
    out << "index,pinned,percentile,grid,mean,lo,hi\n";
    for (const InteractionFamily& fam : families)
        for (size_t c = 0; c < fam.curves.size(); ++c) {
            const CurveGrid& cv = fam.curves[c];
            for (int q = 0; q < cv.grid.size(); ++q) {
                out << group_names[fam.j] << "," << group_names[fam.k];
                write_row(out, {fam.percentiles[c], cv.grid[q], cv.mean[q], cv.lo[q], cv.hi[q]});
            }
        }
}

void write_weights_csv(const std::string& path, const std::vector<WeightSummary>& rows,
                       const ExposureDataset& data) {
    std::ofstream out = open_out(path);
    out << "group,component,n_included,q2.5,q50,q97.5\n";
    for (const WeightSummary& w : rows) {
        out << data.group_names[w.group] << "," << data.component_names[w.group][w.component]
            << "," << w.n_included;
        write_row(out, {w.q025, w.q50, w.q975});
    }
}

}  // namespace ckmr
