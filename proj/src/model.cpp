#include "ckmr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ckmr/errors.hpp"

namespace ckmr {

Mode parse_mode(const std::string& name) {
    if (name == "ckmr") return Mode::ckmr;
    if (name == "nonadaptive") return Mode::nonadaptive;
    if (name == "kernel-only") return Mode::kernel_only;
    throw ConfigError("unknown mode '" + name + "' (ckmr | nonadaptive | kernel-only)");
}

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::ckmr: return "ckmr";
        case Mode::nonadaptive: return "nonadaptive";
        default: return "kernel-only";
    }
}

void Hyper::validate() const {
    auto pos = [](double v, const char* what) {
        if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
    };
    pos(a_pi, "a_pi"); pos(b_pi, "b_pi");
    pos(a_rho, "a_rho"); pos(b_rho, "b_rho");
    pos(a_pi_rho, "a_pi_rho"); pos(b_pi_rho, "b_pi_rho");
    pos(a_tau, "a_tau"); pos(b_tau, "b_tau");
    pos(a_star, "a_star"); pos(b_star, "b_star");
    pos(a_sigma, "a_sigma"); pos(b_sigma, "b_sigma");
    pos(kappa_prop, "kappa_prop");
    pos(jump_s, "jump_s");
    if (kappa < 0.0) throw ConfigError("kappa must be non-negative");
    if (a_phi <= 2.0) throw ConfigError("a_phi must exceed 2 for the moded Beta proposal");
    if (df < 4) throw ConfigError("df must be at least 4");
    if (polar && kappa != 0.0)
        throw ConfigError("polar parameterization assumes a uniform theta prior (kappa = 0)");
}

Eigen::VectorXd equal_weights(int L) {
    return Eigen::VectorXd::Constant(L, 1.0 / std::sqrt(static_cast<double>(L)));
}

ModelState initial_state(const ExposureDataset& data, const SplineSystem& splines,
                         const Hyper& hyper) {
    const int m = data.n_groups();
    ModelState s;
    s.gamma = Eigen::ArrayXi::Ones(m);
    s.gamma_rho = Eigen::ArrayXi::Zero(m);
    s.kernel.rho = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < m; ++j) {
        s.kernel.theta.push_back(equal_weights(data.group_size(j)));
        s.beta.push_back(Eigen::VectorXd::Zero(splines.index[j].d));
    }
    s.tau2 = Eigen::VectorXd::Ones(m);
    s.nu2 = 1.0;
    const double ybar = data.y.mean();
    s.sigma2 = std::max(1e-8, (data.y.array() - ybar).square().sum() /
                                  std::max(1, data.n() - 1));
    s.alpha = Eigen::VectorXd::Zero(data.n_confounders());
    s.alpha[0] = ybar;
    (void)hyper;
    return s;
}

void check_state_invariants(const ModelState& s, const ExposureDataset& data,
                            const SplineSystem& splines, const Hyper& hyper) {
    const int m = data.n_groups();
    auto fail = [](const std::string& what) { throw std::logic_error("state invariant: " + what); };

    if (s.gamma.size() != m || s.gamma_rho.size() != m || s.kernel.rho.size() != m ||
        static_cast<int>(s.kernel.theta.size()) != m ||
        static_cast<int>(s.beta.size()) != m || s.tau2.size() != m)
        fail("container sizes disagree with group count");
    if (s.alpha.size() != data.n_confounders()) fail("alpha size");

    for (int j = 0; j < m; ++j) {
        const bool g = s.gamma[j] != 0, gr = s.gamma_rho[j] != 0;
        if (gr && !g) fail("gamma_rho set without gamma (group " + data.group_names[j] + ")");
        if (hyper.mode == Mode::kernel_only && !g) fail("kernel-only mode requires gamma = 1");
        if (!gr && s.kernel.rho[j] != 0.0) fail("rho nonzero while gamma_rho = 0");
        if (gr && !(s.kernel.rho[j] > 0.0)) fail("rho not positive while gamma_rho = 1");
        if (!g && s.beta[j].cwiseAbs().maxCoeff() != 0.0) fail("beta nonzero while gamma = 0");
        if (std::abs(s.kernel.theta[j].norm() - 1.0) > 1e-10) fail("theta not unit norm");
        if (hyper.polar && s.kernel.theta[j][0] < -1e-12) fail("theta first coordinate negative");
        if (!g && !gr &&
            (s.kernel.theta[j] - equal_weights(data.group_size(j))).cwiseAbs().maxCoeff() >
                1e-12)
            fail("theta off its point mass in the (0,0) state");
        if (!(s.tau2[j] > 0.0)) fail("tau2 not positive");
        if (s.beta[j].size() != splines.index[j].d) fail("beta block length");
    }
    if (!(s.nu2 > 0.0) || !(s.sigma2 > 0.0)) fail("variance not positive");
    if (!(s.pi > 0.0 && s.pi < 1.0 && s.pi_rho > 0.0 && s.pi_rho < 1.0))
        fail("inclusion probability outside (0,1)");
}

std::vector<std::string> draw_names(const ExposureDataset& data, const SplineSystem& splines) {
    std::vector<std::string> names;
    const int m = data.n_groups();
    auto add = [&](const std::string& base, int count) {
        for (int i = 1; i <= count; ++i) names.push_back(base + "." + std::to_string(i));
    };
    add("gamma", m);
    add("gammarho", m);
    add("rho", m);
    for (int j = 0; j < m; ++j)
        for (int l = 1; l <= data.group_size(j); ++l)
            names.push_back("theta." + std::to_string(j + 1) + "." + std::to_string(l));
    for (int j = 0; j < m; ++j)
        for (int k = 1; k <= splines.index[j].d; ++k)
            names.push_back("beta." + std::to_string(j + 1) + "." + std::to_string(k));
    add("tau2", m);
    names.push_back("nu2");
    names.push_back("sigma2");
    add("alpha", data.n_confounders());
    names.push_back("pi");
    names.push_back("pirho");
    names.push_back("logpost");
    return names;
}

Eigen::RowVectorXd flatten_state(const ModelState& s, double logpost) {
    const int m = static_cast<int>(s.gamma.size());
    int total = 3 * m;
    for (const auto& th : s.kernel.theta) total += static_cast<int>(th.size());
    for (const auto& b : s.beta) total += static_cast<int>(b.size());
    total += m + 2 + static_cast<int>(s.alpha.size()) + 2 + 1;

    Eigen::RowVectorXd row(total);
    int at = 0;
    for (int j = 0; j < m; ++j) row[at++] = s.gamma[j];
    for (int j = 0; j < m; ++j) row[at++] = s.gamma_rho[j];
    for (int j = 0; j < m; ++j) row[at++] = s.kernel.rho[j];
    for (const auto& th : s.kernel.theta)
        for (Eigen::Index l = 0; l < th.size(); ++l) row[at++] = th[l];
    for (const auto& b : s.beta)
        for (Eigen::Index k = 0; k < b.size(); ++k) row[at++] = b[k];
    for (int j = 0; j < m; ++j) row[at++] = s.tau2[j];
    row[at++] = s.nu2;
    row[at++] = s.sigma2;
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) row[at++] = s.alpha[i];
    row[at++] = s.pi;
    row[at++] = s.pi_rho;
    row[at++] = logpost;
    return row;
}

ModelState unflatten_draw(const Eigen::RowVectorXd& row, const ExposureDataset& data,
                          const SplineSystem& splines) {
    const int m = data.n_groups();
    ModelState s;
    s.gamma.resize(m);
    s.gamma_rho.resize(m);
    s.kernel.rho.resize(m);
    s.tau2.resize(m);
    int at = 0;
    for (int j = 0; j < m; ++j) s.gamma[j] = row[at++] != 0.0 ? 1 : 0;
    for (int j = 0; j < m; ++j) s.gamma_rho[j] = row[at++] != 0.0 ? 1 : 0;
    for (int j = 0; j < m; ++j) s.kernel.rho[j] = row[at++];
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd th(data.group_size(j));
        for (Eigen::Index l = 0; l < th.size(); ++l) th[l] = row[at++];
        s.kernel.theta.push_back(th);
    }
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd b(splines.index[j].d);
        for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = row[at++];
        s.beta.push_back(b);
    }
    for (int j = 0; j < m; ++j) s.tau2[j] = row[at++];
    s.nu2 = row[at++];
    s.sigma2 = row[at++];
    s.alpha.resize(data.n_confounders());
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) s.alpha[i] = row[at++];
    s.pi = row[at++];
    s.pi_rho = row[at++];
    return s;
}

}  // namespace ckmr
