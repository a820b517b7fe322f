#pragma once

#include <cmath>
#include <cstdint>

namespace csun {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Small deterministic generator (splitmix64 stream + Box-Muller). Used instead
// of <random> engines so that per-sample counter seeding stays cheap and the
// byte-level output is platform-independent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    double next_gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double(), u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586477 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // standard complex Gaussian: re + i*im with re, im ~ N(0, 1/2), E|s|^2 = 1
    void next_cgauss(double& re, double& im) {
        double u1 = next_double(), u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-std::log(u1));
        const double a = 6.283185307179586477 * u2;
        re = r * std::cos(a);
        im = r * std::sin(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace csun
