#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mulinl {

// Reproducible random streams. Raw mt19937_64 output is standardized, so all
// value conversions are done by hand instead of through std distributions,
// whose results are implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal deviate (Box-Muller, one value cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    /// k distinct indices from [0, n), in draw order.
    std::vector<int> sample_distinct(int k, int n) {
        std::vector<int> out;
        out.reserve(k);
        while (static_cast<int>(out.size()) < k) {
            const int candidate = static_cast<int>(below(static_cast<std::uint64_t>(n)));
            bool seen = false;
            for (int v : out)
                if (v == candidate) { seen = true; break; }
            if (!seen) out.push_back(candidate);
        }
        return out;
    }

    /// Derives an independent substream id; order of arguments matters.
    static std::uint64_t stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
        std::uint64_t h = mix(seed);
        h = mix(h ^ (a + 0x9e3779b97f4a7c15ULL));
        h = mix(h ^ (b + 0x7f4a7c159e3779b9ULL));
        h = mix(h ^ (c + 0x2545f4914f6cdd1dULL));
        return h;
    }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mulinl
