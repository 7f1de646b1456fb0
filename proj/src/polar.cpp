#include "ckmr/polar.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ckmr/distributions.hpp"
#include "ckmr/errors.hpp"

namespace ckmr {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kHalfPi = 1.5707963267948966192313216916398;
}  // namespace

std::pair<double, double> polar_box(int l, int L) {
    if (L < 2 || l < 0 || l > L - 2) throw ConfigError("polar_box: bad angle index");
    const bool first = (l == 0);
    const bool last = (l == L - 2);
    if (first && last) return {0.0, kPi};      // L == 2
    if (first) return {0.0, kHalfPi};
    if (last) return {-kPi, kPi};
    return {-kHalfPi, kHalfPi};
}

Eigen::VectorXd polar_to_theta(const Eigen::VectorXd& phi) {
    const int L = static_cast<int>(phi.size()) + 1;
    Eigen::VectorXd theta(L);
    if (L == 1) {
        theta[0] = 1.0;
        return theta;
    }
    for (int l = 0; l < L - 1; ++l) {
        const auto [lo, hi] = polar_box(l, L);
        if (phi[l] < lo - 1e-12 || phi[l] > hi + 1e-12)
            throw std::domain_error("polar angle " + std::to_string(l + 1) + " = " +
                                    std::to_string(phi[l]) + " outside its box");
    }
    double r = 1.0;
    for (int l = 0; l < L - 1; ++l) {
        theta[l] = std::sin(phi[l]) * r;
        r *= std::cos(phi[l]);
    }
    theta[L - 1] = r;
    return theta;
}

Eigen::VectorXd theta_to_polar(const Eigen::VectorXd& theta) {
    const int L = static_cast<int>(theta.size());
    if (L == 1) return Eigen::VectorXd(0);
    if (theta[0] < -1e-12)
        throw std::domain_error("theta_to_polar: first coordinate is negative");

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(L - 1);
    double r = 1.0;
    for (int l = 0; l < L - 2; ++l) {
        if (r <= 1e-300) return phi;  // degenerate tail: remaining angles stay 0
        double s = theta[l] / r;
        s = std::clamp(s, -1.0, 1.0);
        if (l == 0) s = std::max(0.0, s);
        phi[l] = std::asin(s);
        r *= std::cos(phi[l]);
    }
    // last angle covers its full circle
    const double a = theta[L - 2];
    const double b = theta[L - 1];
    if (std::abs(a) > 1e-300 || std::abs(b) > 1e-300) phi[L - 2] = std::atan2(a, b);
    if (L == 2 && phi[0] < 0.0) phi[0] = std::max(phi[0], 0.0);
    return phi;
}

double polar_log_jacobian(const Eigen::VectorXd& phi) {
    const int L = static_cast<int>(phi.size()) + 1;
    double lj = 0.0;
    for (int l = 0; l < L - 1; ++l) {
        const int expo = L - 2 - l;  // 1-based angle l+1 carries exponent L-1-(l+1)
        if (expo == 0) continue;
        const double c = std::abs(std::cos(phi[l]));
        if (c == 0.0) return -std::numeric_limits<double>::infinity();
        lj += expo * std::log(c);
    }
    return lj;
}

double polar_jacobian(const Eigen::VectorXd& phi) { return std::exp(polar_log_jacobian(phi)); }

ModedBetaDraw moded_beta_proposal(double current, double a_phi, double lo, double hi, Rng& rng) {
    if (a_phi <= 2.0) throw ConfigError("moded_beta_proposal: a_phi must exceed 2");
    if (hi <= lo) throw ConfigError("moded_beta_proposal: empty box");
    const double width = hi - lo;
    const double eps = 1e-9;

    const double u_cur = std::clamp((current - lo) / width, eps, 1.0 - eps);
    const double b_cur = (a_phi - 1.0) / u_cur - a_phi + 2.0;  // mode of Beta(a, b_cur) is u_cur

    double u_prop = rng.beta(a_phi, b_cur);
    u_prop = std::clamp(u_prop, eps, 1.0 - eps);
    const double b_prop = (a_phi - 1.0) / u_prop - a_phi + 2.0;

    ModedBetaDraw out;
    out.proposal = lo + width * u_prop;
    out.log_q_forward = log_beta_pdf(u_prop, a_phi, b_cur) - std::log(width);
    out.log_q_reverse = log_beta_pdf(u_cur, a_phi, b_prop) - std::log(width);
    return out;
}

}  // namespace ckmr
