#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "taskvid/hash.hpp"

namespace taskvid {

// Deterministic random stream. mt19937_64 output is pinned by the standard;
// the uniform/normal transforms are written out by hand so draws are
// bit-identical across standard library implementations.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int64_t randint(int64_t n) {
        return static_cast<int64_t>(uniform() * static_cast<double>(n));
    }

    // standard normal via Box-Muller, one value per call (cached pair)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace taskvid
