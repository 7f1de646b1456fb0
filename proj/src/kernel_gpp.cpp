#include "ckmr/kernel_gpp.hpp"

#include <cmath>
#include <limits>

#include "ckmr/errors.hpp"
#include "ckmr/rng.hpp"

namespace ckmr {

Eigen::MatrixXd kernel_matrix(const std::vector<Eigen::MatrixXd>& rows_a,
                              const std::vector<Eigen::MatrixXd>& rows_b,
                              const KernelParams& params) {
    const Eigen::Index na = rows_a.empty() ? 0 : rows_a[0].rows();
    const Eigen::Index nb = rows_b.empty() ? 0 : rows_b[0].rows();
    Eigen::ArrayXXd S = Eigen::ArrayXXd::Zero(na, nb);
    for (size_t m = 0; m < rows_a.size(); ++m) {
        if (params.rho[static_cast<Eigen::Index>(m)] <= 0.0) continue;
        const Eigen::VectorXd ua = rows_a[m] * params.theta[m];
        const Eigen::VectorXd ub = rows_b[m] * params.theta[m];
        const Eigen::ArrayXXd diff =
            ua.rowwise().replicate(nb).array() - ub.transpose().colwise().replicate(na).array();
        S += params.rho[static_cast<Eigen::Index>(m)] * diff.square();
    }
    Eigen::MatrixXd K = (-S).exp().matrix();
    if (&rows_a == &rows_b) {
        // self-kernel: force bitwise symmetry and an exact unit diagonal
        // (vectorized exp can differ in the last ulp between tiles)
        K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
        K.diagonal().setOnes();
    }
    return K;
}

GppKnots select_knots(const ExposureDataset& data, int n1, std::uint64_t seed) {
    const int n = data.n();
    const int p = data.n_exposures();
    if (n1 < 1 || n1 > n) throw ConfigError("select_knots: need 1 <= N1 <= N");

    Eigen::MatrixXd flat(n, p);
    {
        int at = 0;
        for (const auto& g : data.groups) {
            flat.middleCols(at, g.cols()) = g;
            at += static_cast<int>(g.cols());
        }
    }

    GppKnots out;
    if (n1 == n) {
        out.flat = flat;
    } else {
        Rng rng(seed);
        Eigen::MatrixXd C(n1, p);

        // k-means++ seeding
        C.row(0) = flat.row(static_cast<Eigen::Index>(rng.uniform_int(n)));
        Eigen::VectorXd d2(n);
        for (int i = 0; i < n; ++i) d2[i] = (flat.row(i) - C.row(0)).squaredNorm();
        for (int k = 1; k < n1; ++k) {
            double u = rng.uniform() * d2.sum();
            int pick = n - 1;
            for (int i = 0; i < n; ++i) {
                u -= d2[i];
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
            }
            C.row(k) = flat.row(pick);
            for (int i = 0; i < n; ++i)
                d2[i] = std::min(d2[i], (flat.row(i) - C.row(k)).squaredNorm());
        }

        std::vector<int> assign(n, 0);
        for (int iter = 0; iter < 25; ++iter) {
            for (int i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (int k = 0; k < n1; ++k) {
                    const double d = (flat.row(i) - C.row(k)).squaredNorm();
                    if (d < best) {
                        best = d;
                        assign[i] = k;
                    }
                }
            }
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n1, p);
            Eigen::VectorXi counts = Eigen::VectorXi::Zero(n1);
            for (int i = 0; i < n; ++i) {
                sums.row(assign[i]) += flat.row(i);
                counts[assign[i]] += 1;
            }
            for (int k = 0; k < n1; ++k) {
                if (counts[k] > 0) {
                    C.row(k) = sums.row(k) / counts[k];
                } else {
                    // deterministic refill: the point farthest from its centroid
                    int far = 0;
                    double worst = -1.0;
                    for (int i = 0; i < n; ++i) {
                        const double d = (flat.row(i) - C.row(assign[i])).squaredNorm();
                        if (d > worst) {
                            worst = d;
                            far = i;
                        }
                    }
                    C.row(k) = flat.row(far);
                    assign[far] = k;
                }
            }
        }
        out.flat = C;
    }

    int at = 0;
    for (const auto& g : data.groups) {
        out.groups.push_back(out.flat.middleCols(at, g.cols()));
        at += static_cast<int>(g.cols());
    }
    return out;
}

KernelBlocks kernel_blocks(const ExposureDataset& data, const GppKnots& knots,
                           const KernelParams& params) {
    KernelBlocks b;
    b.all_ones = params.rho.size() == 0 || params.rho.maxCoeff() <= 0.0;
    if (b.all_ones) {
        b.k11 = Eigen::MatrixXd::Ones(knots.n1(), knots.n1());
        b.k10 = Eigen::MatrixXd::Ones(knots.n1(), data.n());
        return b;
    }
    b.k11 = kernel_matrix(knots.groups, knots.groups, params);
    b.k10 = kernel_matrix(knots.groups, data.groups, params);
    return b;
}

GppFactor::GppFactor(const KernelBlocks& blocks, const Projection& P, double nu2, double jitter)
    : rank_one_(blocks.all_ones), nu2_(nu2), n1_(static_cast<int>(blocks.k11.rows())) {
    if (rank_one_) {
        jitter_ = std::max(jitter, 1e-12);
        ones_w_ = P.apply(Eigen::VectorXd(Eigen::VectorXd::Ones(P.n())));
        c_ = n1_ / (n1_ + jitter_);
        return;
    }

    w_ = P.project_rows(blocks.k10);
    wwt_.resize(n1_, n1_);
    wwt_.setZero();
    wwt_.selfadjointView<Eigen::Lower>().rankUpdate(w_);

    // jitter ladder: the requested start, then 1e-6 escalating x10 to 1e-2
    std::vector<double> ladder{jitter};
    for (double j = 1e-6; j <= 1e-2 * 1.0000001; j *= 10.0)
        if (j > jitter) ladder.push_back(j);
    for (double j : ladder) {
        k11j_ = blocks.k11;
        k11j_.diagonal().array() += j;
        chol_k11_.compute(k11j_);
        if (chol_k11_.info() != Eigen::Success) continue;
        jitter_ = j;
        logdet_k11_ = 0.0;
        for (int i = 0; i < n1_; ++i)
            logdet_k11_ += 2.0 * std::log(chol_k11_.matrixLLT()(i, i));
        factor_a();
        if (chol_a_.info() == Eigen::Success) return;
    }
    throw NumericalError("gpp factorization failed at maximum jitter");
}

void GppFactor::factor_a() {
    Eigen::MatrixXd a = k11j_ + nu2_ * Eigen::MatrixXd(wwt_.selfadjointView<Eigen::Lower>());
    chol_a_.compute(a);
}

void GppFactor::set_nu2(double nu2) {
    nu2_ = nu2;
    if (rank_one_) return;
    factor_a();
    if (chol_a_.info() != Eigen::Success)
        throw NumericalError("gpp factorization failed on nu2 update");
}

double GppFactor::quadform(const Eigen::VectorXd& r) const {
    if (rank_one_) {
        const double wr = ones_w_.dot(r);
        return r.squaredNorm() -
               nu2_ * c_ * wr * wr / (1.0 + nu2_ * c_ * ones_w_.squaredNorm());
    }
    const Eigen::VectorXd t = w_ * r;
    return r.squaredNorm() - nu2_ * t.dot(chol_a_.solve(t));
}

double GppFactor::logdet() const {
    if (rank_one_) return std::log1p(nu2_ * c_ * ones_w_.squaredNorm());
    double ld = 0.0;
    for (int i = 0; i < n1_; ++i) ld += 2.0 * std::log(chol_a_.matrixLLT()(i, i));
    return std::max(0.0, ld - logdet_k11_);
}

Eigen::VectorXd GppFactor::apply_inverse(const Eigen::VectorXd& r) const {
    if (rank_one_) {
        const double wr = ones_w_.dot(r);
        return r - (nu2_ * c_ * wr / (1.0 + nu2_ * c_ * ones_w_.squaredNorm())) * ones_w_;
    }
    return r - nu2_ * (w_.transpose() * chol_a_.solve(w_ * r));
}

Eigen::MatrixXd GppFactor::apply_inverse(const Eigen::MatrixXd& R) const {
    if (rank_one_) {
        const Eigen::RowVectorXd wr = ones_w_.transpose() * R;
        return R -
               ones_w_ * (nu2_ * c_ / (1.0 + nu2_ * c_ * ones_w_.squaredNorm()) * wr);
    }
    return R - nu2_ * (w_.transpose() * chol_a_.solve(w_ * R));
}

Eigen::MatrixXd GppFactor::k11_solve(const Eigen::MatrixXd& rhs) const {
    if (rank_one_) {
        // (J + jI)^-1 v = v/j - (1'v) / (j (N1 + j)) 1
        const Eigen::RowVectorXd colsum = Eigen::RowVectorXd::Ones(n1_) * rhs;
        return rhs / jitter_ -
               Eigen::VectorXd::Ones(n1_) * (colsum / (jitter_ * (n1_ + jitter_)));
    }
    return chol_k11_.solve(rhs);
}

double gpp_quadform(const KernelBlocks& blocks, const Projection& P, double nu2,
                    const Eigen::VectorXd& r) {
    return GppFactor(blocks, P, nu2).quadform(r);
}

double gpp_logdet(const KernelBlocks& blocks, const Projection& P, double nu2) {
    return GppFactor(blocks, P, nu2).logdet();
}

}  // namespace ckmr
