#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "ckmr/dataset.hpp"
#include "ckmr/kernel_gpp.hpp"
#include "ckmr/splines.hpp"

namespace ckmr {

enum class Mode { ckmr, nonadaptive, kernel_only };

Mode parse_mode(const std::string& name);  // "ckmr" | "nonadaptive" | "kernel-only"
std::string mode_name(Mode mode);

struct Hyper {
    double a_pi = 1.0, b_pi = 1.0;          // Beta prior on pi
    double a_rho = 1.0, b_rho = 1.0;        // Gamma slab on rho
    double a_pi_rho = 1.0, b_pi_rho = 1.0;  // Beta prior on pi_rho
    double a_tau = 1.0, b_tau = 0.005;      // inverse-Gamma on tau2
    double a_star = 1.0, b_star = 1.0;      // inverse-Gamma on nu2
    double a_sigma = 0.001, b_sigma = 0.001;
    double kappa = 0.0;        // vMF prior concentration (0 = uniform)
    double kappa_prop = 1000.0;
    double jump_s = 0.1;       // Gamma random-walk sd for rho and nu2
    double a_phi = 10.0;       // Beta shape for polar angle proposals
    int df = 9;
    int n_knots = -1;          // -1 resolves to min(100, N)
    Mode mode = Mode::ckmr;
    bool polar = true;         // half-sphere angle parameterization for theta

    int knots_for(int n) const { return n_knots > 0 ? std::min(n_knots, n) : std::min(100, n); }
    void validate() const;  // throws ConfigError
};

/*  Full parameter state of one chain.  Exclusion is a point mass: excluded
    beta blocks are exactly zero, excluded rho are exactly zero, and a group
    that is out of both the additive part and the kernel keeps theta at the
    equal-weights direction.  */
struct ModelState {
    Eigen::ArrayXi gamma;      // M main-effect indicators
    Eigen::ArrayXi gamma_rho;  // M kernel indicators, gamma_rho <= gamma
    std::vector<Eigen::VectorXd> beta;  // per group, length d_m
    KernelParams kernel;       // rho (M) and theta (M)
    Eigen::VectorXd tau2;      // M
    double nu2 = 1.0;
    double sigma2 = 1.0;
    Eigen::VectorXd alpha;     // q confounder coefficients
    double pi = 0.5, pi_rho = 0.5;
};

Eigen::VectorXd equal_weights(int L);

ModelState initial_state(const ExposureDataset& data, const SplineSystem& splines,
                         const Hyper& hyper);

// Throws std::logic_error naming the violated invariant.
void check_state_invariants(const ModelState& s, const ExposureDataset& data,
                            const SplineSystem& splines, const Hyper& hyper);

// Flattened draw layout: gamma.*, gammarho.*, rho.*, theta.m.l, beta.m.k,
// tau2.*, nu2, sigma2, alpha.*, pi, pirho, logpost.
std::vector<std::string> draw_names(const ExposureDataset& data, const SplineSystem& splines);
Eigen::RowVectorXd flatten_state(const ModelState& s, double logpost);

// Inverse of flatten_state (the trailing logpost entry is ignored).
ModelState unflatten_draw(const Eigen::RowVectorXd& row, const ExposureDataset& data,
                          const SplineSystem& splines);

}  // namespace ckmr
