#include "ckmr/projection.hpp"

namespace ckmr {

Projection Projection::identity(int n) {
    Projection p;
    p.n_ = n;
    p.q_ = Eigen::MatrixXd(n, 0);
    return p;
}

Projection Projection::complement_of(const Eigen::MatrixXd& B, double rel_tol) {
    Projection p;
    p.n_ = static_cast<int>(B.rows());
    if (B.cols() == 0) {
        p.q_ = Eigen::MatrixXd(p.n_, 0);
        return p;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::MatrixXd& R = qr.matrixR();
    const double lead = std::abs(R(0, 0));
    int rank = 0;
    const int kmax = static_cast<int>(std::min(B.rows(), B.cols()));
    while (rank < kmax && std::abs(R(rank, rank)) > rel_tol * lead) ++rank;
    p.q_ = qr.householderQ() * Eigen::MatrixXd::Identity(p.n_, rank);
    return p;
}

Eigen::VectorXd Projection::apply(const Eigen::VectorXd& v) const {
    if (q_.cols() == 0) return v;
    return v - q_ * (q_.transpose() * v);
}

Eigen::MatrixXd Projection::apply(const Eigen::MatrixXd& A) const {
    if (q_.cols() == 0) return A;
    return A - q_ * (q_.transpose() * A);
}

Eigen::MatrixXd Projection::project_rows(const Eigen::MatrixXd& A) const {
    if (q_.cols() == 0) return A;
    return A - (A * q_) * q_.transpose();
}

}  // namespace ckmr
