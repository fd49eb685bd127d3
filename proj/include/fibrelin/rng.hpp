#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fibrelin {

// Seeded uniform sampling. Doubles are derived from the raw 64-bit stream so
// the values are identical on every platform (distributions from <random>
// do not guarantee that).
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    std::vector<double> uniform_vec(const std::vector<std::pair<double, double>>& ranges) {
        std::vector<double> v;
        v.reserve(ranges.size());
        for (const auto& [lo, hi] : ranges) v.push_back(uniform(lo, hi));
        return v;
    }
};

// Additive recurrence (Weyl) sequence: deterministic low-discrepancy points
// for numeric zero testing. Increments are fractional parts of square roots
// of primes, one per dimension.
struct WeylSequence {
    std::vector<double> alpha;
    std::vector<double> state;

    explicit WeylSequence(int dim) {
        static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                     31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
        alpha.resize(dim);
        state.assign(dim, 0.5);
        for (int i = 0; i < dim; ++i) {
            double s = std::sqrt(static_cast<double>(primes[i % 20]) + 20.0 * (i / 20));
            alpha[i] = s - std::floor(s);
        }
    }

    // next point in [0,1)^dim
    const std::vector<double>& next() {
        for (std::size_t i = 0; i < state.size(); ++i) {
            state[i] += alpha[i];
            if (state[i] >= 1.0) state[i] -= 1.0;
        }
        return state;
    }
};

}  // namespace fibrelin
