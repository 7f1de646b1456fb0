#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ckmr/dataset.hpp"

namespace ckmr {

/*  Penalized B-spline machinery for the additive part of the model.

    Each exposure group gets one cubic basis on fixed, equally spaced knots
    over [-c, c] with c = 1.05 * max_i ||x_i||_2, so every projected value
    x_i' theta with ||theta|| = 1 stays inside the knot range.  The raw df+1
    functions are column-centered at the training projections under equal
    index weights, the redundant last column is dropped, and the remaining
    df coordinates are rotated so the roughness penalty becomes diagonal
    with eigenvalues sorted descending and exactly one trailing zero (the
    unpenalized, essentially linear direction).  */

// Full clamped cubic knot vector (boundary values repeated 4x) giving
// n_basis functions over [lo, hi].  Requires n_basis >= 4.
std::vector<double> clamped_cubic_knots(double lo, double hi, int n_basis);

// All n_basis cubic B-spline values at x.  x must lie in [front, back];
// the right endpoint uses the closed-interval convention.
Eigen::VectorXd cubic_bspline_row(const std::vector<double>& knots, double x);

// Second derivatives of the same functions at x.
Eigen::VectorXd cubic_bspline_dd_row(const std::vector<double>& knots, double x);

// Gram matrix of integrated squared second derivatives, assembled with
// 5-node Gauss-Legendre per knot interval (exact: the integrand is a
// piecewise quadratic).
Eigen::MatrixXd second_derivative_gram(const std::vector<double>& knots);

struct SplineIndex {
    std::vector<double> knots;  // clamped cubic vector over [-c, c]
    double c = 0.0;
    Eigen::VectorXd center;     // training column means of the raw basis
    Eigen::MatrixXd R;          // (df+1) x d: drop-last composed with eigenrotation
    Eigen::VectorXd s;          // penalty diagonal, descending, s[d-1] == 0
    int d = 0;
};

struct SplineSystem {
    std::vector<SplineIndex> index;  // one per exposure group
    int df = 0;
};

SplineSystem build_spline_system(const ExposureDataset& data, int df);

// Reparameterized centered basis rows for group j at index values e.
// Values outside the knot range raise std::out_of_range naming the value;
// unreachable for unit-norm index weights on training rows.
Eigen::MatrixXd evaluate_basis(const SplineSystem& sys, int j, const Eigen::VectorXd& e);

}  // namespace ckmr
