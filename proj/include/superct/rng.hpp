#pragma once

#include <cmath>
#include <cstdint>

namespace superct {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Small keyed generator; a (seed, stream) pair fully determines the sequence,
// so draws are independent of evaluation order across streams.
class Prng {
public:
    explicit Prng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t s = seed;
        state_ = splitmix64(s) ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in (0,1)
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Inverse transform below the threshold, rounded normal approximation above.
    long long poisson(double mean, double normal_threshold = 50.0) {
        if (mean <= 0.0) return 0;
        if (mean < normal_threshold) {
            const double limit = std::exp(-mean);
            double prod = uniform();
            long long n = 0;
            while (prod > limit) {
                prod *= uniform();
                ++n;
            }
            return n;
        }
        const double v = mean + std::sqrt(mean) * gaussian();
        return v > 0.0 ? static_cast<long long>(std::llround(v)) : 0;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace superct
