#pragma once

#include <Eigen/Dense>

#include "ckmr/rng.hpp"

namespace ckmr {

// Log densities. Shape/rate parameterization throughout: Gamma(a, b) has mean
// a/b, InvGamma(a, b) is the reciprocal of that Gamma.
double log_normal_pdf(double x, double mean, double var);
double log_gamma_pdf(double x, double shape, double rate);
double log_inv_gamma_pdf(double x, double shape, double rate);
double log_beta_pdf(double x, double a, double b);

// N(0, diag(prec)^-1) evaluated at x; prec entries must be positive.
double log_mvn_diag_prec(const Eigen::VectorXd& x, const Eigen::VectorXd& prec);

// Surface area of the theta_1 >= 0 half of the unit sphere in R^L, on the
// log scale: log(pi^{L/2} / Gamma(L/2)).  L = 1 gives 0 (a single point).
double log_half_sphere_area(int L);

// von Mises-Fisher log density up to the normalizing constant, which cancels
// in every ratio this sampler forms (kappa never differs between states).
inline double vmf_log_unnorm(const Eigen::VectorXd& theta, const Eigen::VectorXd& mu,
                             double kappa) {
    return kappa == 0.0 ? 0.0 : kappa * theta.dot(mu);
}

Eigen::VectorXd sample_uniform_sphere(int dim, Rng& rng);

// Wood's rejection sampler in tangent-normal form; kappa = 0 degenerates to
// the uniform sphere distribution.
Eigen::VectorXd sample_vmf(double kappa, const Eigen::VectorXd& mu, Rng& rng);

}  // namespace ckmr
