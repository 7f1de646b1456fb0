#include "ckmr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ckmr/distributions.hpp"
#include "ckmr/errors.hpp"
#include "ckmr/polar.hpp"

namespace ckmr {

void ChainConfig::validate() const {
    if (iterations < 1) throw ConfigError("iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations)
        throw ConfigError("burn_in must lie in [0, iterations)");
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (chains < 1) throw ConfigError("need at least one chain");
}

Sampler::Sampler(const Engine& engine, ModelState init, std::uint64_t seed, bool check_ratios)
    : engine_(engine), state_(std::move(init)), rng_(seed), check_ratios_(check_ratios) {
    eval_ = engine_.evaluate(state_);
    diag_.dwell.assign(engine_.data().n_groups(), {0, 0, 0});
}

double Sampler::log_posterior() const { return eval_.loglik + engine_.log_prior(state_); }

void Sampler::set_state(const ModelState& s) {
    state_ = s;
    eval_ = engine_.evaluate(state_);
}

int Sampler::block_state(int m) const {
    if (state_.gamma[m] == 0) return 0;
    return state_.gamma_rho[m] == 0 ? 1 : 2;
}

double Sampler::log_state_prior(int st) const {
    switch (st) {
        case 0: return std::log1p(-state_.pi);
        case 1: return std::log(state_.pi) + std::log1p(-state_.pi_rho);
        default: return std::log(state_.pi) + std::log(state_.pi_rho);
    }
}

Eigen::VectorXd Sampler::propose_theta_prior(int L, double& log_q) {
    const Hyper& h = engine_.hyper();
    if (h.polar) {
        Eigen::VectorXd th = sample_uniform_sphere(L, rng_);
        if (th[0] < 0) th = -th;
        log_q = -log_half_sphere_area(L);
        return th;
    }
    const Eigen::VectorXd mu0 = equal_weights(L);
    Eigen::VectorXd th = sample_vmf(h.kappa, mu0, rng_);
    // same unnormalized convention as prior_theta_logpdf, so the pair cancels
    log_q = vmf_log_unnorm(th, mu0, h.kappa);
    return th;
}

Eigen::VectorXd Sampler::propose_beta_slab(int j, double tau2, double& log_q) {
    const SplineIndex& ix = engine_.splines().index[j];
    Eigen::VectorXd b(ix.d);
    for (int k = 0; k + 1 < ix.d; ++k) b[k] = rng_.normal(0.0, std::sqrt(tau2 / ix.s[k]));
    b[ix.d - 1] = rng_.normal();
    log_q = engine_.slab_beta_logpdf(b, tau2, j);
    return b;
}

void Sampler::refresh_mean() {
    eval_.resid = engine_.residual(state_, eval_.Bg, eval_.included);
    eval_.quad = eval_.factor.quadform(eval_.resid);
    eval_.loglik =
        gaussian_loglik(engine_.data().n(), state_.sigma2, eval_.quad, eval_.logdet);
}

bool Sampler::between_model_move(int m) {
    const Hyper& h = engine_.hyper();
    const int cur = block_state(m);
    int prop;
    if (h.mode == Mode::kernel_only) {
        prop = cur == 1 ? 2 : 1;  // the only other reachable state
    } else {
        static const int others[3][2] = {{1, 2}, {0, 2}, {0, 1}};
        prop = others[cur][rng_.uniform_int(2)];
    }
    ++diag_.between_proposed;

    const int L = engine_.data().group_size(m);
    ModelState s2 = state_;
    double log_fwd = 0.0, log_rev = 0.0;  // densities of born/dying blocks

    if (cur == 0) {  // theta and beta are born from their priors
        double lq = 0.0;
        s2.gamma[m] = 1;
        s2.kernel.theta[m] = propose_theta_prior(L, lq);
        log_fwd += lq;
        s2.beta[m] = propose_beta_slab(m, state_.tau2[m], lq);
        log_fwd += lq;
    }
    if (prop == 0) {  // they die; the reverse move would recreate them
        s2.gamma[m] = 0;
        s2.beta[m].setZero();
        s2.kernel.theta[m] = equal_weights(L);
        log_rev += engine_.prior_theta_logpdf(state_.kernel.theta[m]);
        log_rev += engine_.slab_beta_logpdf(state_.beta[m], state_.tau2[m], m);
    }
    if (prop == 2) {  // cur != 2, so the kernel block is born
        s2.gamma_rho[m] = 1;
        s2.kernel.rho[m] = rng_.gamma(h.a_rho, h.b_rho);
        if (!(s2.kernel.rho[m] > 0.0) || !std::isfinite(s2.kernel.rho[m])) {
            ++diag_.forced_rejections;
            return false;
        }
        log_fwd += log_gamma_pdf(s2.kernel.rho[m], h.a_rho, h.b_rho);
    } else {
        s2.gamma_rho[m] = 0;
        s2.kernel.rho[m] = 0.0;
        if (cur == 2) log_rev += log_gamma_pdf(state_.kernel.rho[m], h.a_rho, h.b_rho);
    }

    const double odds = log_state_prior(prop) - log_state_prior(cur);

    Evaluation ev2;
    try {
        const bool dim_change = (cur == 0) != (prop == 0);  // gamma flip moves theta too
        const Projection* rp = dim_change ? nullptr : &eval_.P;
        const KernelBlocks* rb = (cur != 2 && prop != 2) ? &eval_.blocks : nullptr;
        ev2 = engine_.evaluate(s2, rp, rb);
    } catch (const NumericalError&) {
        ++diag_.forced_rejections;
        return false;
    }

    const double reduced = (ev2.loglik - eval_.loglik) + odds;

    if (check_ratios_) {
        const double full = (ev2.loglik + engine_.log_prior(s2)) -
                            (eval_.loglik + engine_.log_prior(state_)) + log_rev - log_fwd;
        diag_.max_ratio_gap = std::max(diag_.max_ratio_gap, std::abs(full - reduced));
    }

    if (std::log(rng_.uniform_pos()) < reduced) {
        state_ = std::move(s2);
        eval_ = std::move(ev2);
        ++diag_.between_accepted;
        return true;
    }
    return false;
}

bool Sampler::refine_theta(int m) {
    const Hyper& h = engine_.hyper();
    const int L = engine_.data().group_size(m);
    if (state_.gamma[m] == 0 || L < 2) return false;
    ++diag_.refine_proposed;

    ModelState s2 = state_;
    double lr = 0.0;  // proposal correction plus prior ratio

    if (h.polar) {
        const Eigen::VectorXd phi = theta_to_polar(state_.kernel.theta[m]);
        Eigen::VectorXd phi2(phi.size());
        for (Eigen::Index l = 0; l < phi.size(); ++l) {
            const auto box = polar_box(static_cast<int>(l), L);
            const ModedBetaDraw d =
                moded_beta_proposal(phi[l], h.a_phi, box.first, box.second, rng_);
            phi2[l] = d.proposal;
            lr += d.log_q_reverse - d.log_q_forward;
        }
        s2.kernel.theta[m] = polar_to_theta(phi2);
        // uniform half-sphere prior cancels; the surface measure does not
        lr += polar_log_jacobian(phi2) - polar_log_jacobian(phi);
    } else {
        if (std::isinf(h.kappa_prop)) {
            s2.kernel.theta[m] = state_.kernel.theta[m];  // identity-move limit
        } else {
            s2.kernel.theta[m] = sample_vmf(h.kappa_prop, state_.kernel.theta[m], rng_);
            // vMF(kappa_prop, .) is symmetric in (current, proposal)
        }
        const Eigen::VectorXd mu0 = equal_weights(L);
        lr += vmf_log_unnorm(s2.kernel.theta[m], mu0, h.kappa) -
              vmf_log_unnorm(state_.kernel.theta[m], mu0, h.kappa);
    }

    // theta is likelihood-inert when there is no spline block for it and its
    // kernel block is off
    const bool inert = engine_.flat() ||
                       (h.mode == Mode::kernel_only && state_.kernel.rho[m] == 0.0);
    Evaluation ev2;
    bool have_ev2 = false;
    if (!inert) {
        try {
            const Projection* rp = h.mode == Mode::kernel_only ? &eval_.P : nullptr;
            const KernelBlocks* rb = state_.kernel.rho[m] > 0.0 ? nullptr : &eval_.blocks;
            ev2 = engine_.evaluate(s2, rp, rb);
            have_ev2 = true;
            lr += ev2.loglik - eval_.loglik;
        } catch (const NumericalError&) {
            ++diag_.forced_rejections;
            return false;
        }
    }

    if (std::log(rng_.uniform_pos()) < lr) {
        state_ = std::move(s2);
        if (have_ev2) eval_ = std::move(ev2);
        ++diag_.refine_accepted;
        return true;
    }
    return false;
}

void Sampler::gibbs_beta() {
    const Hyper& h = engine_.hyper();
    if (h.mode == Mode::kernel_only || eval_.included.empty()) return;

    if (engine_.flat()) {
        double lq = 0.0;
        for (int j : eval_.included) state_.beta[j] = propose_beta_slab(j, state_.tau2[j], lq);
        return;
    }

    const Eigen::MatrixXd& Bg = eval_.Bg;
    const int cols = static_cast<int>(Bg.cols());
    Eigen::VectorXd vdiag(cols);
    int at = 0;
    for (int j : eval_.included) {
        const SplineIndex& ix = engine_.splines().index[j];
        for (int k = 0; k + 1 < ix.d; ++k) vdiag[at + k] = ix.s[k] / state_.tau2[j];
        vdiag[at + ix.d - 1] = 1.0;
        at += ix.d;
    }

    // P B_gamma = 0 makes Omega^-1 B_gamma = B_gamma, so this is a plain
    // ridge draw; going through the factor keeps that a theorem, not an input.
    const Eigen::MatrixXd Bo = eval_.factor.apply_inverse(Bg);
    Eigen::MatrixXd phi = Bg.transpose() * Bo / state_.sigma2;
    phi = (0.5 * (phi + phi.transpose())).eval();
    phi.diagonal() += vdiag;

    Eigen::LLT<Eigen::MatrixXd> chol(phi);
    if (chol.info() != Eigen::Success) {
        ++diag_.forced_rejections;  // step skipped, state untouched
        return;
    }

    const Eigen::VectorXd ytil = engine_.data().y - engine_.data().Z * state_.alpha;
    const Eigen::VectorXd mu = chol.solve(Bo.transpose() * ytil / state_.sigma2);
    Eigen::VectorXd z(cols);
    for (int k = 0; k < cols; ++k) z[k] = rng_.normal();
    const Eigen::VectorXd draw = mu + chol.matrixU().solve(z);

    at = 0;
    for (int j : eval_.included) {
        const int d = engine_.splines().index[j].d;
        state_.beta[j] = draw.segment(at, d);
        at += d;
    }
    refresh_mean();
}

void Sampler::gibbs_tau2() {
    const Hyper& h = engine_.hyper();
    for (int j = 0; j < engine_.data().n_groups(); ++j) {
        if (h.mode != Mode::kernel_only && state_.gamma[j] != 0) {
            const SplineIndex& ix = engine_.splines().index[j];
            double ss = 0.0;
            for (int k = 0; k + 1 < ix.d; ++k)
                ss += ix.s[k] * state_.beta[j][k] * state_.beta[j][k];
            state_.tau2[j] = rng_.inv_gamma(h.a_tau + 0.5 * (ix.d - 1), h.b_tau + 0.5 * ss);
        } else {
            state_.tau2[j] = rng_.inv_gamma(h.a_tau, h.b_tau);
        }
    }
}

void Sampler::gibbs_pi() {
    const Hyper& h = engine_.hyper();
    const int M = engine_.data().n_groups();
    const int on = state_.gamma.sum();
    state_.pi = rng_.beta(h.a_pi + on, h.b_pi + M - on);
}

void Sampler::gibbs_pi_rho() {
    const Hyper& h = engine_.hyper();
    int succ = 0, fail = 0;
    for (int j = 0; j < engine_.data().n_groups(); ++j)
        if (state_.gamma[j] != 0) (state_.gamma_rho[j] != 0 ? succ : fail) += 1;
    state_.pi_rho = rng_.beta(h.a_pi_rho + succ, h.b_pi_rho + fail);
}

double gamma_rw_log_ratio(double cur, double prop, double s) {
    const double s2 = s * s;
    const double fwd = std::max(cur, 1e-12);
    const double rev = std::max(prop, 1e-12);
    return log_gamma_pdf(cur, rev * rev / s2, rev / s2) -
           log_gamma_pdf(prop, fwd * fwd / s2, fwd / s2);
}

bool Sampler::mh_rho(int m) {
    const Hyper& h = engine_.hyper();
    if (state_.gamma_rho[m] == 0) return false;
    ++diag_.rho_proposed;

    const double s2j = h.jump_s * h.jump_s;
    const double cur = std::max(state_.kernel.rho[m], 1e-12);
    const double prop = rng_.gamma(cur * cur / s2j, cur / s2j);
    if (!(prop > 0.0) || !std::isfinite(prop)) {
        ++diag_.forced_rejections;
        return false;
    }

    double lr = gamma_rw_log_ratio(state_.kernel.rho[m], prop, h.jump_s);
    lr += log_gamma_pdf(prop, h.a_rho, h.b_rho) -
          log_gamma_pdf(state_.kernel.rho[m], h.a_rho, h.b_rho);

    ModelState s2 = state_;
    s2.kernel.rho[m] = prop;

    Evaluation ev2;
    bool have_ev2 = false;
    if (!engine_.flat()) {
        try {
            ev2 = engine_.evaluate(s2, &eval_.P, nullptr);
            have_ev2 = true;
            lr += ev2.loglik - eval_.loglik;
        } catch (const NumericalError&) {
            ++diag_.forced_rejections;
            return false;
        }
    }

    if (std::log(rng_.uniform_pos()) < lr) {
        state_ = std::move(s2);
        if (have_ev2) eval_ = std::move(ev2);
        ++diag_.rho_accepted;
        return true;
    }
    return false;
}

bool Sampler::mh_nu2() {
    const Hyper& h = engine_.hyper();
    ++diag_.nu2_proposed;

    const double s2j = h.jump_s * h.jump_s;
    const double cur = std::max(state_.nu2, 1e-12);
    const double prop = rng_.gamma(cur * cur / s2j, cur / s2j);
    if (!(prop > 0.0) || !std::isfinite(prop)) {
        ++diag_.forced_rejections;
        return false;
    }

    double lr = gamma_rw_log_ratio(state_.nu2, prop, h.jump_s);
    lr += log_inv_gamma_pdf(prop, h.a_star, h.b_star) -
          log_inv_gamma_pdf(state_.nu2, h.a_star, h.b_star);

    if (engine_.flat()) {
        if (std::log(rng_.uniform_pos()) < lr) {
            state_.nu2 = prop;
            ++diag_.nu2_accepted;
            return true;
        }
        return false;
    }

    // same kernel and projection, only the small factorization moves
    GppFactor f2 = eval_.factor;
    double quad2 = 0.0, logdet2 = 0.0;
    try {
        f2.set_nu2(prop);
        quad2 = f2.quadform(eval_.resid);
        logdet2 = f2.logdet();
    } catch (const NumericalError&) {
        ++diag_.forced_rejections;
        return false;
    }
    const double ll2 = gaussian_loglik(engine_.data().n(), state_.sigma2, quad2, logdet2);
    lr += ll2 - eval_.loglik;

    if (std::log(rng_.uniform_pos()) < lr) {
        state_.nu2 = prop;
        eval_.factor = std::move(f2);
        eval_.quad = quad2;
        eval_.logdet = logdet2;
        eval_.loglik = ll2;
        ++diag_.nu2_accepted;
        return true;
    }
    return false;
}

void Sampler::gibbs_alpha() {
    const ExposureDataset& data = engine_.data();
    const int q = data.n_confounders();

    if (engine_.flat()) {
        for (int i = 0; i < q; ++i) state_.alpha[i] = rng_.normal();
        return;
    }

    const Eigen::MatrixXd Zo = eval_.factor.apply_inverse(data.Z);
    Eigen::MatrixXd prec = data.Z.transpose() * Zo / state_.sigma2;
    prec = (0.5 * (prec + prec.transpose())).eval();
    prec.diagonal().array() += 1.0;

    Eigen::LLT<Eigen::MatrixXd> chol(prec);
    if (chol.info() != Eigen::Success) {
        ++diag_.forced_rejections;
        return;
    }

    const Eigen::VectorXd ybb = eval_.resid + data.Z * state_.alpha;  // y - B beta
    const Eigen::VectorXd mu = chol.solve(Zo.transpose() * ybb / state_.sigma2);
    Eigen::VectorXd z(q);
    for (int i = 0; i < q; ++i) z[i] = rng_.normal();
    state_.alpha = mu + chol.matrixU().solve(z);
    refresh_mean();
}

void Sampler::gibbs_sigma2() {
    const Hyper& h = engine_.hyper();
    if (engine_.flat()) {
        state_.sigma2 = rng_.inv_gamma(h.a_sigma, h.b_sigma);
        return;
    }
    state_.sigma2 =
        rng_.inv_gamma(h.a_sigma + 0.5 * engine_.data().n(), h.b_sigma + 0.5 * eval_.quad);
    eval_.loglik =
        gaussian_loglik(engine_.data().n(), state_.sigma2, eval_.quad, eval_.logdet);
}

void Sampler::sweep() {
    const int M = engine_.data().n_groups();
    for (int m = 0; m < M; ++m) between_model_move(m);
    for (int m = 0; m < M; ++m) refine_theta(m);
    gibbs_beta();
    gibbs_tau2();
    gibbs_pi();
    for (int m = 0; m < M; ++m)
        if (state_.gamma_rho[m] != 0) mh_rho(m);
    gibbs_pi_rho();
    mh_nu2();
    gibbs_alpha();
    gibbs_sigma2();
    for (int m = 0; m < M; ++m) ++diag_.dwell[m][block_state(m)];
}

PosteriorDraws run_chain(const Engine& engine, const ChainConfig& cfg) {
    cfg.validate();
    PosteriorDraws out;
    out.names = draw_names(engine.data(), engine.splines());
    const int kept_per = (cfg.iterations - cfg.burn_in + cfg.thin - 1) / cfg.thin;
    out.draws.resize(static_cast<Eigen::Index>(kept_per) * cfg.chains,
                     static_cast<Eigen::Index>(out.names.size()));
    out.chain_ids.reserve(out.draws.rows());
    out.iteration_ids.reserve(out.draws.rows());

    Eigen::Index row = 0;
    for (int c = 0; c < cfg.chains; ++c) {
        Sampler smp(engine, initial_state(engine.data(), engine.splines(), engine.hyper()),
                    chain_seed(cfg.seed, c), cfg.check_reduced_ratios);
        for (int it = 0; it < cfg.iterations; ++it) {
            smp.sweep();
            if (cfg.check_invariants)
                check_state_invariants(smp.state(), engine.data(), engine.splines(),
                                       engine.hyper());
            if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
                const double lp = smp.log_posterior();
                if (!std::isfinite(lp))
                    throw NumericalError("non-finite log posterior in chain " +
                                         std::to_string(c) + " at iteration " +
                                         std::to_string(it));
                out.draws.row(row) = flatten_state(smp.state(), lp);
                out.chain_ids.push_back(c);
                out.iteration_ids.push_back(it);
                ++row;
            }
        }
        out.diagnostics.push_back(smp.diagnostics());
    }
    return out;
}

PosteriorDraws run_chain(const ExposureDataset& data, const SplineSystem& splines,
                         const GppKnots& knots, const Hyper& hyper, const ChainConfig& cfg,
                         bool flat_likelihood) {
    const Engine engine(data, splines, knots, hyper, flat_likelihood);
    return run_chain(engine, cfg);
}

}  // namespace ckmr
