#include <doctest.h>

#include <cmath>
#include <vector>

#include "ckmr/errors.hpp"
#include "ckmr/kernel_gpp.hpp"
#include "ckmr/projection.hpp"
#include "ckmr/rng.hpp"

using namespace ckmr;

namespace {

// Two groups (sizes 2 and 1) of uniform exposures, standardized.
ExposureDataset toy_data(int n, Rng& rng) {
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) X(i, k) = rng.uniform(-2.0, 2.0);
        y[i] = rng.normal();
    }
    const GroupingSpec spec = GroupingSpec::from_rows({{"a1", "a"}, {"a2", "a"}, {"c", "c"}});
    return build_dataset(y, X, {"a1", "a2", "c"}, Eigen::MatrixXd(n, 0), {}, spec);
}

KernelParams random_params(const ExposureDataset& data, Rng& rng) {
    KernelParams p;
    p.rho.resize(data.n_groups());
    for (int m = 0; m < data.n_groups(); ++m) {
        p.rho[m] = rng.uniform(0.1, 2.0);
        Eigen::VectorXd th(data.group_size(m));
        for (int l = 0; l < th.size(); ++l) th[l] = rng.normal();
        th.normalize();
        if (th[0] < 0) th = -th;
        p.theta.push_back(th);
    }
    return p;
}

// Entry-by-entry kernel evaluation straight from the formula.
double kernel_entry(const ExposureDataset& a_set, int i, const ExposureDataset& b_set, int j,
                    const KernelParams& p) {
    double s = 0.0;
    for (int m = 0; m < a_set.n_groups(); ++m) {
        const double d = (a_set.groups[m].row(i) - b_set.groups[m].row(j)) * p.theta[m];
        s += p.rho[m] * d * d;
    }
    return std::exp(-s);
}

Eigen::MatrixXd random_centered_basis(int n, int cols, Rng& rng) {
    Eigen::MatrixXd B(n, cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cols; ++j) B(i, j) = rng.normal();
    B.rowwise() -= B.colwise().mean();
    return B;
}

// Dense covariance using the same low-rank kernel and jitter that the GPP
// path defines, so agreement tests the Woodbury algebra alone.
Eigen::MatrixXd dense_omega(const KernelBlocks& blocks, const Projection& P, double nu2,
                            double jitter) {
    Eigen::MatrixXd k11j = blocks.k11;
    k11j.diagonal().array() += jitter;
    const Eigen::MatrixXd kt = blocks.k10.transpose() * k11j.llt().solve(blocks.k10);
    const int n = static_cast<int>(blocks.k10.cols());
    const Eigen::MatrixXd pd =
        Eigen::MatrixXd::Identity(n, n) - P.basis() * P.basis().transpose();
    return Eigen::MatrixXd::Identity(n, n) + nu2 * pd * kt * pd;
}

double dense_logdet(const Eigen::MatrixXd& omega) {
    const Eigen::LLT<Eigen::MatrixXd> llt(omega);
    double ld = 0.0;
    for (Eigen::Index i = 0; i < omega.rows(); ++i)
        ld += 2.0 * std::log(llt.matrixLLT()(i, i));
    return ld;
}

}  // namespace

TEST_SUITE_BEGIN("kernel-gpp");

TEST_CASE("kernel formula basics") {
    Rng rng(201);
    const ExposureDataset data = toy_data(6, rng);

    KernelParams zero = random_params(data, rng);
    zero.rho.setZero();
    const Eigen::MatrixXd ones = kernel_matrix(data.groups, data.groups, zero);
    CHECK(ones.isOnes(0.0));

    // single exposure at distance 1 with rho = 1
    Eigen::MatrixXd xa(1, 1), xb(1, 1);
    xa << 0.0;
    xb << 1.0;
    KernelParams single;
    single.rho.resize(1);
    single.rho << 1.0;
    single.theta.push_back(Eigen::VectorXd::Ones(1));
    const Eigen::MatrixXd k = kernel_matrix({xa}, {xb}, single);
    CHECK(k(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("kernel matches the scalar double loop") {
    Rng rng(203);
    const ExposureDataset data = toy_data(6, rng);
    const KernelParams p = random_params(data, rng);
    const Eigen::MatrixXd K = kernel_matrix(data.groups, data.groups, p);
    REQUIRE(K.rows() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(K(i, i) == 1.0);
        for (int j = 0; j < 6; ++j) {
            CHECK(std::abs(K(i, j) - kernel_entry(data, i, data, j, p)) < 1e-12);
            CHECK(K(i, j) == K(j, i));
            CHECK(K(i, j) > 0.0);
            CHECK(K(i, j) <= 1.0);
        }
    }
}

TEST_CASE("raising any rho weakly shrinks off-diagonal entries") {
    Rng rng(207);
    const ExposureDataset data = toy_data(8, rng);
    KernelParams p = random_params(data, rng);
    const Eigen::MatrixXd before = kernel_matrix(data.groups, data.groups, p);
    for (int m = 0; m < data.n_groups(); ++m) {
        KernelParams q = p;
        q.rho[m] += 0.7;
        const Eigen::MatrixXd after = kernel_matrix(data.groups, data.groups, q);
        CHECK(((before - after).array() >= -1e-15).all());
    }
}

TEST_CASE("knot selection") {
    Rng rng(211);
    const ExposureDataset data = toy_data(40, rng);

    const GppKnots all = select_knots(data, 40, 99);
    CHECK(all.flat.rows() == 40);
    CHECK(all.groups[0] == data.groups[0]);  // data rows in order
    CHECK(all.groups[1] == data.groups[1]);

    const GppKnots one = select_knots(data, 1, 99);
    Eigen::RowVectorXd mean(3);
    mean << data.groups[0].col(0).mean(), data.groups[0].col(1).mean(),
        data.groups[1].col(0).mean();
    CHECK((one.flat.row(0) - mean).cwiseAbs().maxCoeff() < 1e-10);

    const GppKnots a = select_knots(data, 10, 7);
    const GppKnots b = select_knots(data, 10, 7);
    CHECK(a.flat == b.flat);
    CHECK_THROWS_AS(select_knots(data, 41, 7), ConfigError);
}

TEST_CASE("Woodbury quadratic form and determinant vs dense oracle, N1 = N") {
    Rng rng(213);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 20;
        const ExposureDataset data = toy_data(n, rng);
        const KernelParams p = random_params(data, rng);
        const GppKnots knots = select_knots(data, n, 5);
        const KernelBlocks blocks = kernel_blocks(data, knots, p);
        const Projection P = Projection::complement_of(random_centered_basis(n, 4, rng));
        const double nu2 = rng.uniform(0.2, 4.0);
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = rng.normal();

        GppFactor f(blocks, P, nu2);
        const Eigen::MatrixXd omega = dense_omega(blocks, P, nu2, f.jitter_used());
        const double dq = r.dot(omega.llt().solve(r));
        CHECK(std::abs(f.quadform(r) - dq) / std::abs(dq) < 1e-8);
        const double dl = dense_logdet(omega);
        CHECK(std::abs(f.logdet() - dl) / std::max(1.0, std::abs(dl)) < 1e-8);
        CHECK(f.logdet() >= 0.0);
        const Eigen::VectorXd iv = f.apply_inverse(r);
        CHECK((omega * iv - r).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("zero jitter at N1 = N matches the plain dense kernel") {
    // With no jitter the GPP at N1 = N is exactly the dense model, so the
    // oracle can be built from K itself.
    Rng rng(217);
    const int n = 18;
    const ExposureDataset data = toy_data(n, rng);
    const KernelParams p = random_params(data, rng);
    const GppKnots knots = select_knots(data, n, 5);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    const Projection P = Projection::complement_of(random_centered_basis(n, 3, rng));
    const double nu2 = 1.3;
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = rng.normal();

    GppFactor f(blocks, P, nu2, 0.0);
    if (f.jitter_used() == 0.0) {
        const Eigen::MatrixXd pd =
            Eigen::MatrixXd::Identity(n, n) - P.basis() * P.basis().transpose();
        const Eigen::MatrixXd omega =
            Eigen::MatrixXd::Identity(n, n) + nu2 * pd * blocks.k11 * pd;
        CHECK(f.quadform(r) == doctest::Approx(r.dot(omega.llt().solve(r))).epsilon(1e-8));
        CHECK(f.logdet() == doctest::Approx(dense_logdet(omega)).epsilon(1e-8));
    }
}

TEST_CASE("GPP identity holds for N1 < N") {
    Rng rng(219);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 30, n1 = 9;
        const ExposureDataset data = toy_data(n, rng);
        const KernelParams p = random_params(data, rng);
        const GppKnots knots = select_knots(data, n1, 11);
        const KernelBlocks blocks = kernel_blocks(data, knots, p);
        const Projection P = Projection::complement_of(random_centered_basis(n, 5, rng));
        const double nu2 = rng.uniform(0.1, 3.0);
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = rng.normal();

        GppFactor f(blocks, P, nu2);
        const Eigen::MatrixXd omega = dense_omega(blocks, P, nu2, f.jitter_used());
        CHECK(f.quadform(r) == doctest::Approx(r.dot(omega.llt().solve(r))).epsilon(1e-8));
        CHECK(f.logdet() == doctest::Approx(dense_logdet(omega)).epsilon(1e-8));
    }
}

TEST_CASE("both bracket placements of the projector agree") {
    Rng rng(223);
    const int n = 25, n1 = 8;
    const ExposureDataset data = toy_data(n, rng);
    const KernelParams p = random_params(data, rng);
    const GppKnots knots = select_knots(data, n1, 3);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    const Projection P = Projection::complement_of(random_centered_basis(n, 4, rng));
    const double nu2 = 0.9, jitter = 1e-6;

    const int q = P.rank();
    const Eigen::MatrixXd pd =
        Eigen::MatrixXd::Identity(n, n) - P.basis() * P.basis().transpose();
    (void)q;
    Eigen::MatrixXd k11j = blocks.k11;
    k11j.diagonal().array() += jitter;
    // single application (uses idempotence) vs doubled application
    const Eigen::MatrixXd a1 = k11j + nu2 * blocks.k10 * pd * blocks.k10.transpose();
    const Eigen::MatrixXd a2 = k11j + nu2 * (blocks.k10 * pd) * (blocks.k10 * pd).transpose();
    CHECK((a1 - a2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("trivial edges: nu2 = 0 and r = 0") {
    Rng rng(227);
    const int n = 15;
    const ExposureDataset data = toy_data(n, rng);
    const KernelParams p = random_params(data, rng);
    const GppKnots knots = select_knots(data, 6, 3);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    const Projection P = Projection::identity(n);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = rng.normal();

    CHECK(gpp_quadform(blocks, P, 0.0, r) == doctest::Approx(r.squaredNorm()).epsilon(1e-12));
    CHECK(gpp_logdet(blocks, P, 0.0) == doctest::Approx(0.0));
    CHECK(gpp_quadform(blocks, P, 2.0, Eigen::VectorXd::Zero(n)) == 0.0);
}

TEST_CASE("logdet strictly increases in nu2") {
    Rng rng(229);
    const int n = 20;
    const ExposureDataset data = toy_data(n, rng);
    const KernelParams p = random_params(data, rng);
    const GppKnots knots = select_knots(data, 8, 3);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    const Projection P = Projection::complement_of(random_centered_basis(n, 3, rng));
    double prev = -1.0;
    for (double nu2 : {0.1, 1.0, 10.0}) {
        const double ld = gpp_logdet(blocks, P, nu2);
        const double dense = dense_logdet(dense_omega(blocks, P, nu2, 1e-6));
        CHECK(ld == doctest::Approx(dense).epsilon(1e-8));
        CHECK(ld > prev);
        prev = ld;
    }
}

TEST_CASE("all-rho-zero rank-one path equals the generic path") {
    Rng rng(233);
    const int n = 30, n1 = 7;
    const ExposureDataset data = toy_data(n, rng);
    KernelParams p = random_params(data, rng);
    p.rho.setZero();
    const GppKnots knots = select_knots(data, n1, 3);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    REQUIRE(blocks.all_ones);
    KernelBlocks generic = blocks;  // same all-ones matrices, forced down the slow path
    generic.all_ones = false;

    for (int rep = 0; rep < 10; ++rep) {
        const Projection P =
            rep % 2 ? Projection::identity(n)
                    : Projection::complement_of(random_centered_basis(n, 4, rng));
        const double nu2 = rng.uniform(0.05, 5.0);
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = rng.normal();

        GppFactor fast(blocks, P, nu2);
        REQUIRE(fast.rank_one());

        // analytic oracle: Kt = c 11' exactly, so Omega = I + nu2 c (P1)(P1)'
        // and Sherman-Morrison gives closed forms.  w is built through the
        // dense projector to stay independent of the implementation.
        const Eigen::MatrixXd pd =
            Eigen::MatrixXd::Identity(n, n) - P.basis() * P.basis().transpose();
        const Eigen::VectorXd w = pd * Eigen::VectorXd::Ones(n);
        const double c = n1 / (n1 + fast.jitter_used());
        const double denom = 1.0 + nu2 * c * w.squaredNorm();
        const double q_oracle = r.squaredNorm() - nu2 * c * w.dot(r) * w.dot(r) / denom;
        CHECK(fast.quadform(r) == doctest::Approx(q_oracle).epsilon(1e-12));
        CHECK(fast.logdet() == doctest::Approx(std::log(denom)).epsilon(1e-12));
        const Eigen::VectorXd inv_oracle = r - (nu2 * c * w.dot(r) / denom) * w;
        CHECK((fast.apply_inverse(r) - inv_oracle).cwiseAbs().maxCoeff() < 1e-10);

        // the generic path on the exactly singular all-ones K11 is its
        // worst-conditioned case; require only loose agreement
        GppFactor slow(generic, P, nu2);
        REQUIRE(!slow.rank_one());
        CHECK(fast.quadform(r) == doctest::Approx(slow.quadform(r)).epsilon(1e-6));
        CHECK(fast.logdet() == doctest::Approx(slow.logdet()).epsilon(1e-6));
    }
}

TEST_CASE("set_nu2 refactorization equals a fresh factorization") {
    Rng rng(239);
    const int n = 22;
    const ExposureDataset data = toy_data(n, rng);
    const KernelParams p = random_params(data, rng);
    const GppKnots knots = select_knots(data, 9, 3);
    const KernelBlocks blocks = kernel_blocks(data, knots, p);
    const Projection P = Projection::complement_of(random_centered_basis(n, 4, rng));
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = rng.normal();

    GppFactor f(blocks, P, 0.5);
    f.set_nu2(2.5);
    GppFactor fresh(blocks, P, 2.5);
    CHECK(f.quadform(r) == doctest::Approx(fresh.quadform(r)).epsilon(1e-12));
    CHECK(f.logdet() == doctest::Approx(fresh.logdet()).epsilon(1e-12));
}

TEST_CASE("projection operator basics") {
    Rng rng(241);
    const int n = 40;
    const Eigen::MatrixXd B = random_centered_basis(n, 6, rng);
    const Projection P = Projection::complement_of(B);
    CHECK(P.rank() == 6);

    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    const Eigen::VectorXd pv = P.apply(v);
    CHECK((P.apply(pv) - pv).cwiseAbs().maxCoeff() < 1e-10);          // idempotent
    CHECK((P.apply(B)).cwiseAbs().maxCoeff() < 1e-10);                // annihilates B

    // rank-deficient input: duplicated columns collapse
    Eigen::MatrixXd Bdup(n, 8);
    Bdup.leftCols(6) = B;
    Bdup.col(6) = B.col(0);
    Bdup.col(7) = 2.0 * B.col(1) - B.col(2);
    const Projection Pd = Projection::complement_of(Bdup);
    CHECK(Pd.rank() == 6);
    CHECK((Pd.apply(v) - pv).cwiseAbs().maxCoeff() < 1e-10);

    const Projection id = Projection::identity(n);
    CHECK(id.apply(v) == v);

    // empty basis behaves as identity
    const Projection empty = Projection::complement_of(Eigen::MatrixXd(n, 0));
    CHECK(empty.apply(v) == v);
}

TEST_SUITE_END();
