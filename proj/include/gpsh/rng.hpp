#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gpsh {

/// Seeded generator with portable uniform/Gaussian draws.
///
/// mt19937_64's bit stream is pinned by the standard, but the distribution
/// adapters in <random> are not; hand-rolled mappings keep sampled output
/// byte-identical across standard libraries (the CLI promises reproducible CSV).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in (0,1); never returns 0 so log() below is safe.
    double uniform() {
        const std::uint64_t bits = gen_();
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call; spare cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Integer in [0, m).
    std::uint64_t index(std::uint64_t m) { return gen_() % m; }

    std::mt19937_64& raw() { return gen_; }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace gpsh
