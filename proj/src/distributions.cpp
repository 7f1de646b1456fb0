#include "ckmr/distributions.hpp"

#include <cmath>

#include "ckmr/errors.hpp"

namespace ckmr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_inv_gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double log_beta_pdf(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

double log_mvn_diag_prec(const Eigen::VectorXd& x, const Eigen::VectorXd& prec) {
    double lp = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k)
        lp += 0.5 * (std::log(prec[k]) - kLog2Pi) - 0.5 * prec[k] * x[k] * x[k];
    return lp;
}

double log_half_sphere_area(int L) {
    return 0.5 * L * std::log(M_PI) - std::lgamma(0.5 * L);
}

Eigen::VectorXd sample_uniform_sphere(int dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal();
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

Eigen::VectorXd sample_vmf(double kappa, const Eigen::VectorXd& mu, Rng& rng) {
    const int d = static_cast<int>(mu.size());
    if (d < 1) throw ConfigError("sample_vmf: empty direction");
    if (d == 1) {
        Eigen::VectorXd out(1);
        const double p_pos = 1.0 / (1.0 + std::exp(-2.0 * kappa));  // P(theta = mu)
        out[0] = (rng.uniform() < p_pos) ? mu[0] : -mu[0];
        return out;
    }
    if (kappa == 0.0) return sample_uniform_sphere(d, rng);

    const double dm1 = static_cast<double>(d - 1);
    const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1)) / dm1;
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

    double w = 0.0;
    for (;;) {
        const double z = rng.beta(0.5 * dm1, 0.5 * dm1);
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        const double u = rng.uniform_pos();
        if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
    }

    // uniform direction in the tangent space of mu
    Eigen::VectorXd v(d);
    double norm = 0.0;
    do {
        for (int i = 0; i < d; ++i) v[i] = rng.normal();
        v -= v.dot(mu) * mu;
        norm = v.norm();
    } while (norm < 1e-12);
    v /= norm;

    Eigen::VectorXd theta = w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
    return theta / theta.norm();
}

}  // namespace ckmr
