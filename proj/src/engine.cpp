#include "ckmr/engine.hpp"

#include <cmath>

#include "ckmr/distributions.hpp"

namespace ckmr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}  // namespace

double gaussian_loglik(int n, double sigma2, double quad, double logdet) {
    return -0.5 * n * (kLog2Pi + std::log(sigma2)) - 0.5 * logdet - 0.5 * quad / sigma2;
}

Eigen::MatrixXd spline_design(const ExposureDataset& data, const SplineSystem& splines, int j,
                              const Eigen::VectorXd& theta_j) {
    return evaluate_basis(splines, j, data.groups[j] * theta_j);
}

Projection adaptive_projection(const SplineSystem& splines, const ExposureDataset& data,
                               const std::vector<Eigen::VectorXd>& theta,
                               const Eigen::ArrayXi& gamma, Mode mode) {
    const int n = data.n();
    if (mode == Mode::kernel_only) return Projection::identity(n);

    std::vector<int> use;
    for (int j = 0; j < data.n_groups(); ++j)
        if (mode == Mode::nonadaptive || gamma[j] != 0) use.push_back(j);
    if (use.empty()) return Projection::identity(n);

    int cols = 0;
    for (int j : use) cols += splines.index[j].d;
    Eigen::MatrixXd B(n, cols);
    int at = 0;
    for (int j : use) {
        B.middleCols(at, splines.index[j].d) = spline_design(data, splines, j, theta[j]);
        at += splines.index[j].d;
    }
    return Projection::complement_of(B);
}

Engine::Engine(ExposureDataset data, SplineSystem splines, GppKnots knots, Hyper hyper,
               bool flat_likelihood)
    : data_(std::move(data)),
      splines_(std::move(splines)),
      knots_(std::move(knots)),
      hyper_(hyper),
      flat_(flat_likelihood) {
    hyper_.validate();
}

Eigen::VectorXd Engine::residual(const ModelState& s, const Eigen::MatrixXd& Bg,
                                 const std::vector<int>& included) const {
    Eigen::VectorXd r = data_.y - data_.Z * s.alpha;
    int at = 0;
    for (int j : included) {
        const int d = splines_.index[j].d;
        r.noalias() -= Bg.middleCols(at, d) * s.beta[j];
        at += d;
    }
    return r;
}

Evaluation Engine::evaluate(const ModelState& s, const Projection* reuse_p,
                            const KernelBlocks* reuse_blocks) const {
    Evaluation ev;
    if (hyper_.mode != Mode::kernel_only) {
        for (int j = 0; j < data_.n_groups(); ++j)
            if (s.gamma[j] != 0) ev.included.push_back(j);
        int cols = 0;
        for (int j : ev.included) cols += splines_.index[j].d;
        ev.Bg.resize(data_.n(), cols);
        int at = 0;
        for (int j : ev.included) {
            const int d = splines_.index[j].d;
            ev.Bg.middleCols(at, d) = spline_design(data_, splines_, j, s.kernel.theta[j]);
            at += d;
        }
    } else {
        ev.Bg.resize(data_.n(), 0);
    }
    ev.resid = residual(s, ev.Bg, ev.included);

    // Prior-only chains never consult the covariance, so leave it unbuilt.
    if (flat_) return ev;

    ev.P = reuse_p ? *reuse_p
                   : adaptive_projection(splines_, data_, s.kernel.theta, s.gamma, hyper_.mode);
    ev.blocks = reuse_blocks ? *reuse_blocks : kernel_blocks(data_, knots_, s.kernel);
    ev.factor = GppFactor(ev.blocks, ev.P, s.nu2);
    ev.quad = ev.factor.quadform(ev.resid);
    ev.logdet = ev.factor.logdet();
    ev.loglik = gaussian_loglik(data_.n(), s.sigma2, ev.quad, ev.logdet);
    return ev;
}

double Engine::marginal_loglik(const ModelState& s) const {
    const Projection P =
        adaptive_projection(splines_, data_, s.kernel.theta, s.gamma, hyper_.mode);
    const KernelBlocks blocks = kernel_blocks(data_, knots_, s.kernel);
    const GppFactor factor(blocks, P, s.nu2);

    std::vector<int> included;
    Eigen::MatrixXd Bg(data_.n(), 0);
    if (hyper_.mode != Mode::kernel_only) {
        for (int j = 0; j < data_.n_groups(); ++j)
            if (s.gamma[j] != 0) included.push_back(j);
        int cols = 0;
        for (int j : included) cols += splines_.index[j].d;
        Bg.resize(data_.n(), cols);
        int at = 0;
        for (int j : included) {
            const int d = splines_.index[j].d;
            Bg.middleCols(at, d) = spline_design(data_, splines_, j, s.kernel.theta[j]);
            at += d;
        }
    }
    const Eigen::VectorXd r = residual(s, Bg, included);
    return gaussian_loglik(data_.n(), s.sigma2, factor.quadform(r), factor.logdet());
}

double Engine::prior_theta_logpdf(const Eigen::VectorXd& theta) const {
    // kappa > 0 is unnormalized: every use is a ratio at fixed kappa.
    if (hyper_.kappa > 0.0)
        return vmf_log_unnorm(theta, equal_weights(static_cast<int>(theta.size())), hyper_.kappa);
    return -log_half_sphere_area(static_cast<int>(theta.size()));
}

double Engine::slab_beta_logpdf(const Eigen::VectorXd& beta, double tau2, int j) const {
    const SplineIndex& ix = splines_.index[j];
    Eigen::VectorXd prec(ix.d);
    for (int k = 0; k + 1 < ix.d; ++k) prec[k] = ix.s[k] / tau2;
    prec[ix.d - 1] = 1.0;
    return log_mvn_diag_prec(beta, prec);
}

double Engine::log_prior(const ModelState& s) const {
    const Hyper& h = hyper_;
    double lp = 0.0;
    lp += log_beta_pdf(s.pi, h.a_pi, h.b_pi);
    lp += log_beta_pdf(s.pi_rho, h.a_pi_rho, h.b_pi_rho);
    lp += log_inv_gamma_pdf(s.nu2, h.a_star, h.b_star);
    lp += log_inv_gamma_pdf(s.sigma2, h.a_sigma, h.b_sigma);
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i)
        lp += log_normal_pdf(s.alpha[i], 0.0, 1.0);

    for (int j = 0; j < data_.n_groups(); ++j) {
        const bool g = s.gamma[j] != 0;
        const bool gr = s.gamma_rho[j] != 0;
        lp += log_inv_gamma_pdf(s.tau2[j], h.a_tau, h.b_tau);
        lp += g ? std::log(s.pi) : std::log1p(-s.pi);
        if (g) {
            lp += gr ? std::log(s.pi_rho) : std::log1p(-s.pi_rho);
            lp += prior_theta_logpdf(s.kernel.theta[j]);
            if (h.mode != Mode::kernel_only) lp += slab_beta_logpdf(s.beta[j], s.tau2[j], j);
        }
        if (gr) lp += log_gamma_pdf(s.kernel.rho[j], h.a_rho, h.b_rho);
    }
    return lp;
}

double Engine::log_posterior(const ModelState& s, const Evaluation& eval) const {
    return eval.loglik + log_prior(s);
}

double Engine::log_posterior(const ModelState& s) const {
    return log_posterior(s, evaluate(s));
}

double marginal_loglik(const ModelState& s, const ExposureDataset& data,
                       const SplineSystem& splines, const GppKnots& knots, const Hyper& hyper) {
    return Engine(data, splines, knots, hyper).marginal_loglik(s);
}

double log_posterior_unnorm(const ModelState& s, const ExposureDataset& data,
                            const SplineSystem& splines, const GppKnots& knots,
                            const Hyper& hyper, bool flat_likelihood) {
    const Engine eng(data, splines, knots, hyper, flat_likelihood);
    return eng.log_posterior(s);
}

}  // namespace ckmr
