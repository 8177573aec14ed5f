#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "unprompt/types.hpp"

namespace unprompt {

// Wraps mt19937_64 with distribution code written out here, so draws are
// reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_mix_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Box-Muller; one draw per call keeps the stream simple to reason about.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Matrix uniform_matrix(Index rows, Index cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }

    Matrix normal_matrix(Index rows, Index cols, double scale = 1.0) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = scale * normal();
        return m;
    }

    // Child stream for a named sub-task; keeps sub-tasks independent of
    // how many draws the parent has made so far.
    Rng fork(std::uint64_t salt) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_mix_ & 0xffffffffu),
                          static_cast<std::uint32_t>(seed_mix_ >> 32),
                          static_cast<std::uint32_t>(salt & 0xffffffffu),
                          static_cast<std::uint32_t>(salt >> 32)};
        Rng child;
        child.engine_.seed(seq);
        child.seed_mix_ = seed_mix_ ^ (salt * 0x9e3779b97f4a7c15ull);
        return child;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_;
};

}  // namespace unprompt
