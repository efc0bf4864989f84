#pragma once

#include <cstdint>
#include <vector>

namespace dagcast {

/// Deterministic RNG with explicit, platform-independent derivations.
/// splitmix64 core; std distributions are avoided so traces are reproducible
/// independent of the standard library in use.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound) {
        // Rejection sampling to kill modulo bias.
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return unit() < p;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Choose k distinct values from [0, m) (partial Fisher-Yates).
    std::vector<std::uint64_t> sample(std::uint64_t m, std::uint64_t k);

    /// Derive an independent stream; label keeps derivations from colliding.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t label) {
        DetRng r(seed ^ (0xa076'1d64'78bd'642fULL * (label + 1)));
        r.next();
        return r.next();
    }

private:
    std::uint64_t state_;
};

inline std::vector<std::uint64_t> DetRng::sample(std::uint64_t m, std::uint64_t k) {
    std::vector<std::uint64_t> idx(m);
    for (std::uint64_t i = 0; i < m; ++i) idx[i] = i;
    if (k > m) k = m;
    for (std::uint64_t i = 0; i < k; ++i) {
        std::uint64_t j = i + below(m - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace dagcast
