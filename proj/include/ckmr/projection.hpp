#pragma once

#include <Eigen/Dense>

namespace ckmr {

/*  Orthogonal-complement projector P = I - B (B'B)^- B', held as the thin
    orthonormal factor Q of a rank-revealing pivoted QR of B, so applying P
    costs O(n * rank) and rank deficiency is absorbed by the factorization.  */
class Projection {
public:
    Projection() = default;

    static Projection identity(int n);
    // P projecting onto the orthogonal complement of col(B).  Columns whose
    // pivoted-QR diagonal falls below rel_tol times the leading one are
    // treated as dependent.
    static Projection complement_of(const Eigen::MatrixXd& B, double rel_tol = 1e-8);

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;  // P v
    Eigen::MatrixXd apply(const Eigen::MatrixXd& A) const;  // P A (column-wise)
    Eigen::MatrixXd project_rows(const Eigen::MatrixXd& A) const;  // A P

    int n() const { return n_; }
    int rank() const { return static_cast<int>(q_.cols()); }
    const Eigen::MatrixXd& basis() const { return q_; }  // n x rank, orthonormal

private:
    int n_ = 0;
    Eigen::MatrixXd q_;
};

}  // namespace ckmr
