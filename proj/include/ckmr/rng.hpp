#pragma once

#include <cstdint>
#include <random>

namespace ckmr {

/*  Deterministic RNG stream used everywhere in the library.

    The engine is std::mt19937_64 but every distribution transform is written
    out explicitly (Box-Muller, Marsaglia-Tsang, Wood's vMF envelope lives in
    distributions.cpp), so a (seed, call sequence) pair fully determines every
    draw independent of the standard library in use.  Bit-identical reruns are
    part of the output contract.  */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1); never returns 0 so log() is safe
    double uniform_pos() {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n);

    double normal();                                  // standard normal, Box-Muller with cached spare
    double normal(double mean, double sd) { return mean + sd * normal(); }

    double gamma(double shape, double rate);          // mean shape/rate
    double inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }
    double beta(double a, double b);

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Fixed seed-derivation arithmetic (documented in the README): every chain,
// replicate, and knot-selection stream is a pure function of the user seed.
inline std::uint64_t chain_seed(std::uint64_t base, int chain) {
    return base + 1000003ull * static_cast<std::uint64_t>(chain + 1);
}
inline std::uint64_t replicate_seed(std::uint64_t base, int replicate) {
    return base + static_cast<std::uint64_t>(replicate);
}
inline std::uint64_t knots_seed(std::uint64_t base) { return base ^ 0x9e3779b97f4a7c15ull; }

}  // namespace ckmr
