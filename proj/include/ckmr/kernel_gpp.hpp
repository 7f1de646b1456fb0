#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ckmr/dataset.hpp"
#include "ckmr/projection.hpp"

namespace ckmr {

/*  Gaussian kernel over grouped exposure indices plus the low-rank
    predictive-process algebra.

    K(E_i, E_i') = exp[ -sum_m rho_m ((x_im - x_i'm)' theta_m)^2 ]

    The covariance I + nu^2 P Kt P with Kt = K10' K11^-1 K10 is never formed:
    quadratic forms and the log-determinant go through the Woodbury identity
    and the determinant lemma on the N1 x N1 block

        A = K11 + nu^2 (K10 P)(K10 P)'

    using PP = P.  When every rho_m is zero the kernel is the all-ones matrix
    and Kt collapses to the exact rank-one c * 11' with c = N1/(N1 + jitter),
    handled by Sherman-Morrison without any Cholesky.  */

struct KernelParams {
    Eigen::VectorXd rho;                  // M, entries >= 0
    std::vector<Eigen::VectorXd> theta;   // M unit vectors, length L_m
};

// Cross-kernel between two row sets given as per-group matrices.
Eigen::MatrixXd kernel_matrix(const std::vector<Eigen::MatrixXd>& rows_a,
                              const std::vector<Eigen::MatrixXd>& rows_b,
                              const KernelParams& params);

struct GppKnots {
    Eigen::MatrixXd flat;                 // N1 x p, standardized exposure space
    std::vector<Eigen::MatrixXd> groups;  // N1 x L_m slices of `flat`

    int n1() const { return static_cast<int>(flat.rows()); }
};

// k-means centroids of the standardized exposures (k-means++ init, 25 Lloyd
// iterations, deterministic in `seed`).  n1 == N returns the data rows as-is.
GppKnots select_knots(const ExposureDataset& data, int n1, std::uint64_t seed);

struct KernelBlocks {
    Eigen::MatrixXd k11;    // N1 x N1, no jitter
    Eigen::MatrixXd k10;    // N1 x N (rows = knots, columns = observations)
    bool all_ones = false;  // every rho is zero
};

KernelBlocks kernel_blocks(const ExposureDataset& data, const GppKnots& knots,
                           const KernelParams& params);

class GppFactor {
public:
    // Empty factor; usable only after assignment from a real one.
    GppFactor() = default;

    // Factorizes for the given projection and nu2.  Jitter starts at
    // `jitter` and escalates x10 up to 1e-2 on Cholesky failure; total
    // failure throws NumericalError.
    GppFactor(const KernelBlocks& blocks, const Projection& P, double nu2,
              double jitter = 1e-6);

    double quadform(const Eigen::VectorXd& r) const;   // r' Omega^-1 r
    double logdet() const;                             // log det Omega  (>= 0)
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& r) const;
    Eigen::MatrixXd apply_inverse(const Eigen::MatrixXd& R) const;
    Eigen::MatrixXd k11_solve(const Eigen::MatrixXd& rhs) const;  // (K11+jI)^-1 rhs

    // Re-factorizes for a new nu2, reusing the kernel/projection work.
    void set_nu2(double nu2);

    double nu2() const { return nu2_; }
    double jitter_used() const { return jitter_; }
    bool rank_one() const { return rank_one_; }
    const Eigen::MatrixXd& w() const { return w_; }  // K10 P

private:
    void factor_a();

    bool rank_one_ = false;
    double nu2_ = 0.0;
    double jitter_ = 0.0;
    int n1_ = 0;

    // generic path
    Eigen::MatrixXd w_;     // K10 P
    Eigen::MatrixXd wwt_;   // W W'
    Eigen::MatrixXd k11j_;  // K11 + jitter I
    Eigen::LLT<Eigen::MatrixXd> chol_k11_;
    Eigen::LLT<Eigen::MatrixXd> chol_a_;
    double logdet_k11_ = 0.0;

    // rank-one path
    Eigen::VectorXd ones_w_;  // P 1
    double c_ = 0.0;          // N1 / (N1 + jitter)
};

// Spec-level conveniences (one-shot factorization).
double gpp_quadform(const KernelBlocks& blocks, const Projection& P, double nu2,
                    const Eigen::VectorXd& r);
double gpp_logdet(const KernelBlocks& blocks, const Projection& P, double nu2);

}  // namespace ckmr
