#include "ckmr/rng.hpp"

#include <cmath>

#include "ckmr/errors.hpp"

namespace ckmr {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ConfigError("uniform_int: n must be positive");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = eng_();
    while (x >= bound) x = eng_();
    return x % n;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

// Marsaglia & Tsang squeeze; shape < 1 handled by the boosting identity
// G(a) = G(a+1) * U^(1/a).
double Rng::gamma(double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0) throw ConfigError("gamma: shape and rate must be positive");
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(uniform_pos(), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v / rate;
    }
}

double Rng::beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
}

}  // namespace ckmr
