#pragma once

#include <Eigen/Dense>
#include <utility>

#include "ckmr/rng.hpp"

namespace ckmr {

/*  Half-sphere polar parameterization for index weight vectors.

    theta_1   = sin(phi_1)
    theta_l   = sin(phi_l) * prod_{k<l} cos(phi_k)      l = 2..L-1
    theta_L   =              prod_{k<L} cos(phi_k)

    Angle boxes: the first angle lives in [0, pi/2] so theta_1 >= 0; interior
    angles live in [-pi/2, pi/2]; the LAST angle lives in [-pi, pi] so the
    final coordinate pair covers its full circle.  (For L = 2 the single angle
    is simultaneously first and last: box [0, pi].)  With these boxes the image
    is exactly the half sphere {theta : ||theta|| = 1, theta_1 >= 0}; shrinking
    the last box to [-pi/2, pi/2] would force theta_L >= 0 and lose half of it.

    The surface measure pulls back to prod_l |cos(phi_l)|^(L-1-l) d(phi)
    (1-based l): the tangent vectors d(theta)/d(phi_a) are mutually orthogonal
    with norms prod_{k<a} cos(phi_k).  */

// [lo, hi] box of angle `l` (0-based) for an L-dimensional weight vector.
std::pair<double, double> polar_box(int l, int L);

// Inverse of polar_to_theta; wherever the residual cosine product hits 0 the
// remaining angles are set to 0. Requires theta[0] >= -1e-12.
Eigen::VectorXd theta_to_polar(const Eigen::VectorXd& theta);

// Requires every angle inside its box; L = 1 maps the empty angle vector to (1).
Eigen::VectorXd polar_to_theta(const Eigen::VectorXd& phi);

double polar_log_jacobian(const Eigen::VectorXd& phi);
double polar_jacobian(const Eigen::VectorXd& phi);

// Scaled/shifted Beta proposal on a box with its mode pinned at `current`:
// current maps to u in (0,1), b is solved from mode(Beta(a,b)) = u, the draw
// maps back. Forward and reverse log densities include the box width so the
// pair is directly usable in an acceptance ratio.
struct ModedBetaDraw {
    double proposal;
    double log_q_forward;
    double log_q_reverse;
};
ModedBetaDraw moded_beta_proposal(double current, double a_phi, double lo, double hi, Rng& rng);

}  // namespace ckmr
