#include "ckmr/splines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ckmr/errors.hpp"

namespace ckmr {

namespace {

constexpr int kOrder = 4;  // cubic

// All basis values of the given order at x, by the Cox-de Boor triangle over
// the full knot vector.  Zero-width spans contribute nothing (0/0 -> 0).
Eigen::VectorXd all_bases(const std::vector<double>& knots, int order, double x) {
    const int n = static_cast<int>(knots.size()) - order;
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(knots.size() - 1);
    const double hi = knots.back();
    for (int k = 0; k + 1 < static_cast<int>(knots.size()); ++k) {
        const bool inside = knots[k] <= x && x < knots[k + 1];
        const bool at_end = x == hi && knots[k] < hi && knots[k + 1] == hi;
        cur[k] = (inside || at_end) ? 1.0 : 0.0;
    }
    for (int o = 2; o <= order; ++o) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(knots.size() - o);
        for (int k = 0; k + o < static_cast<int>(knots.size()); ++k) {
            double v = 0.0;
            const double dl = knots[k + o - 1] - knots[k];
            const double dr = knots[k + o] - knots[k + 1];
            if (dl > 0.0) v += (x - knots[k]) / dl * cur[k];
            if (dr > 0.0) v += (knots[k + o] - x) / dr * cur[k + 1];
            next[k] = v;
        }
        cur = next;
    }
    return cur.head(n);
}

}  // namespace

std::vector<double> clamped_cubic_knots(double lo, double hi, int n_basis) {
    if (n_basis < kOrder) throw ConfigError("clamped_cubic_knots: need at least 4 basis functions");
    if (!(hi > lo)) throw ConfigError("clamped_cubic_knots: empty knot range");
    const int n_interior = n_basis - kOrder;
    std::vector<double> knots;
    knots.reserve(n_basis + kOrder);
    for (int i = 0; i < kOrder; ++i) knots.push_back(lo);
    for (int i = 1; i <= n_interior; ++i)
        knots.push_back(lo + (hi - lo) * i / (n_interior + 1));
    for (int i = 0; i < kOrder; ++i) knots.push_back(hi);
    return knots;
}

Eigen::VectorXd cubic_bspline_row(const std::vector<double>& knots, double x) {
    return all_bases(knots, kOrder, x);
}

Eigen::VectorXd cubic_bspline_dd_row(const std::vector<double>& knots, double x) {
    // N''_{k,4} = 3 [ N'_{k,3}/(t_{k+3}-t_k) - N'_{k+1,3}/(t_{k+4}-t_{k+1}) ]
    // N'_{k,3}  = 2 [ N_{k,2}/(t_{k+2}-t_k) - N_{k+1,2}/(t_{k+3}-t_{k+1}) ]
    const int n = static_cast<int>(knots.size()) - kOrder;
    const Eigen::VectorXd b2 = all_bases(knots, 2, x);  // length knots.size()-2

    auto d3 = [&](int k) {
        double v = 0.0;
        const double dl = knots[k + 2] - knots[k];
        const double dr = knots[k + 3] - knots[k + 1];
        if (dl > 0.0) v += b2[k] / dl;
        if (dr > 0.0) v -= b2[k + 1] / dr;
        return 2.0 * v;
    };

    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        double v = 0.0;
        const double dl = knots[k + 3] - knots[k];
        const double dr = knots[k + 4] - knots[k + 1];
        if (dl > 0.0) v += d3(k) / dl;
        if (dr > 0.0) v -= d3(k + 1) / dr;
        out[k] = 3.0 * v;
    }
    return out;
}

Eigen::MatrixXd second_derivative_gram(const std::vector<double>& knots) {
    static const double node[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                   0.5384693101056831, 0.9061798459386640};
    static const double weight[5] = {0.2369268850561891, 0.4786286704993665,
                                     0.5688888888888889, 0.4786286704993665,
                                     0.2369268850561891};
    const int n = static_cast<int>(knots.size()) - kOrder;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    for (size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i], b = knots[i + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int q = 0; q < 5; ++q) {
            const Eigen::VectorXd dd = cubic_bspline_dd_row(knots, mid + half * node[q]);
            gram.noalias() += (half * weight[q]) * dd * dd.transpose();
        }
    }
    return gram;
}

SplineSystem build_spline_system(const ExposureDataset& data, int df) {
    if (df < 4) throw ConfigError("build_spline_system: df must be at least 4");
    SplineSystem sys;
    sys.df = df;
    sys.index.resize(data.n_groups());

    for (int j = 0; j < data.n_groups(); ++j) {
        const Eigen::MatrixXd& X = data.groups[j];
        const int L = static_cast<int>(X.cols());
        double max_norm = 0.0;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            max_norm = std::max(max_norm, X.row(i).norm());
        if (max_norm <= 0.0)
            throw ConfigError("build_spline_system: degenerate index for group " +
                              data.group_names[j]);

        SplineIndex& si = sys.index[j];
        si.c = 1.05 * max_norm;
        si.knots = clamped_cubic_knots(-si.c, si.c, df + 1);
        si.d = df;

        // centering at the equal-weights index
        const Eigen::VectorXd u =
            X * Eigen::VectorXd::Constant(L, 1.0 / std::sqrt(static_cast<double>(L)));
        Eigen::MatrixXd raw(X.rows(), df + 1);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            raw.row(i) = cubic_bspline_row(si.knots, u[i]).transpose();
        si.center = raw.colwise().mean();

        // penalty on the first df coordinates (last centered column dropped)
        const Eigen::MatrixXd gram = second_derivative_gram(si.knots).topLeftCorner(df, df);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success)
            throw NumericalError("build_spline_system: penalty eigendecomposition failed");

        Eigen::VectorXd lam = eig.eigenvalues().reverse();
        Eigen::MatrixXd U = eig.eigenvectors().rowwise().reverse();
        const double tol = 1e-8 * lam[0];
        if (!(lam[df - 2] > tol) || !(std::abs(lam[df - 1]) < tol))
            throw NumericalError("build_spline_system: penalty rank is not df-1");
        lam[df - 1] = 0.0;

        // deterministic eigenvector signs: largest-magnitude entry positive
        for (int k = 0; k < df; ++k) {
            Eigen::Index imax;
            U.col(k).cwiseAbs().maxCoeff(&imax);
            if (U(imax, k) < 0.0) U.col(k) = -U.col(k);
        }

        si.s = lam;
        si.R = Eigen::MatrixXd::Zero(df + 1, df);
        si.R.topRows(df) = U;
    }
    return sys;
}

Eigen::MatrixXd evaluate_basis(const SplineSystem& sys, int j, const Eigen::VectorXd& e) {
    const SplineIndex& si = sys.index.at(j);
    Eigen::MatrixXd out(e.size(), si.d);
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        double x = e[i];
        if (x < -si.c - 1e-9 || x > si.c + 1e-9) {
            char buf[96];
            std::snprintf(buf, sizeof buf,
                          "evaluate_basis: index value %.6g outside knot range [%.6g, %.6g]", x,
                          -si.c, si.c);
            throw std::out_of_range(buf);
        }
        x = std::clamp(x, -si.c, si.c);
        out.row(i) =
            (cubic_bspline_row(si.knots, x) - si.center).transpose() * si.R;
    }
    return out;
}

}  // namespace ckmr
