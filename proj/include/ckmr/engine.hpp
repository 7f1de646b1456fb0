#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ckmr/dataset.hpp"
#include "ckmr/kernel_gpp.hpp"
#include "ckmr/model.hpp"
#include "ckmr/projection.hpp"
#include "ckmr/splines.hpp"

namespace ckmr {

// Centered, reparameterized spline block for group j at index weights theta_j:
// one row per observation, d_j columns.
Eigen::MatrixXd spline_design(const ExposureDataset& data, const SplineSystem& splines, int j,
                              const Eigen::VectorXd& theta_j);

// -n/2 log(2 pi sigma2) - logdet/2 - quad/(2 sigma2)
double gaussian_loglik(int n, double sigma2, double quad, double logdet);

/*  P = I - B (B'B)^- B' with B chosen by mode:

      ckmr         columns of the groups with gamma = 1, at their current theta
      nonadaptive  every group's columns regardless of gamma
      kernel-only  no columns at all (P = I)

    Since the ckmr/nonadaptive basis always contains the included blocks,
    P B_gamma = 0 holds in every mode and Omega B_gamma = B_gamma collapses
    the beta full conditional to a plain ridge regression.  */
Projection adaptive_projection(const SplineSystem& splines, const ExposureDataset& data,
                               const std::vector<Eigen::VectorXd>& theta,
                               const Eigen::ArrayXi& gamma, Mode mode);

// Everything the likelihood of one state needs, cached so sampler moves that
// leave a piece untouched can hand it back instead of rebuilding it.
struct Evaluation {
    Projection P;
    KernelBlocks blocks;
    GppFactor factor;
    Eigen::MatrixXd Bg;          // included spline blocks, column-concatenated
    std::vector<int> included;   // group indices behind Bg's blocks, ascending
    Eigen::VectorXd resid;       // y - Bg beta_included - Z alpha
    double quad = 0.0;           // resid' (I + nu2 P Kt P)^-1 resid
    double logdet = 0.0;
    double loglik = 0.0;         // 0 in flat mode
};

class Engine {
public:
    Engine(ExposureDataset data, SplineSystem splines, GppKnots knots, Hyper hyper,
           bool flat_likelihood = false);

    // Fresh evaluation of a state.  Pass reuse_p when the projection is known
    // unchanged (kernel toggles, rho/nu2 updates) and reuse_blocks when the
    // kernel inputs (rho, theta of gamma_rho-active groups) are too.
    Evaluation evaluate(const ModelState& s, const Projection* reuse_p = nullptr,
                        const KernelBlocks* reuse_blocks = nullptr) const;

    double marginal_loglik(const ModelState& s) const;  // ignores the flat flag
    double log_prior(const ModelState& s) const;
    double log_posterior(const ModelState& s) const;
    double log_posterior(const ModelState& s, const Evaluation& eval) const;

    // Per-block prior pieces, shared with the between-model moves.
    double prior_theta_logpdf(const Eigen::VectorXd& theta) const;
    double slab_beta_logpdf(const Eigen::VectorXd& beta, double tau2, int j) const;

    // Residual for the current mean parameters given a cached design.
    Eigen::VectorXd residual(const ModelState& s, const Eigen::MatrixXd& Bg,
                             const std::vector<int>& included) const;

    const ExposureDataset& data() const { return data_; }
    const SplineSystem& splines() const { return splines_; }
    const GppKnots& knots() const { return knots_; }
    const Hyper& hyper() const { return hyper_; }
    bool flat() const { return flat_; }

private:
    ExposureDataset data_;
    SplineSystem splines_;
    GppKnots knots_;
    Hyper hyper_;
    bool flat_ = false;
};

// Spec-surface one-shot forms of the Engine methods.
double marginal_loglik(const ModelState& s, const ExposureDataset& data,
                       const SplineSystem& splines, const GppKnots& knots, const Hyper& hyper);
double log_posterior_unnorm(const ModelState& s, const ExposureDataset& data,
                            const SplineSystem& splines, const GppKnots& knots,
                            const Hyper& hyper, bool flat_likelihood = false);

}  // namespace ckmr
