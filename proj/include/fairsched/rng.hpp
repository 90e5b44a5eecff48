#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fairsched/errors.hpp"

namespace fairsched {

/// Deterministic random stream. mt19937_64 raw output is pinned by the standard,
/// and all derived draws below avoid std::*_distribution (whose algorithms are
/// implementation-defined), so identical seeds give identical streams on every
/// platform. Substreams are derived by hashing (seed, stream id), which keeps
/// per-pool / per-restart generation independent of iteration order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    /// Independent stream for (seed, stream_id), e.g. one per pool or restart.
    static Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t mixed = splitmix64(seed) ^ splitmix64(stream_id + 0x9e3779b97f4a7c15ULL);
        return Rng(mixed);
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    int next_below(int n) {
        if (n <= 0) throw InvalidInputError("Rng::next_below: n must be positive");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<int>(x % bound);
    }

    /// Standard normal via Box-Muller (deterministic, no internal cache).
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Index draw from an unnormalized nonnegative weight vector.
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw InvalidInputError("Rng::categorical: empty distribution");
        double total = 0.0;
        for (double p : probs) {
            if (p < 0.0 || !std::isfinite(p)) throw InvalidInputError("Rng::categorical: bad weight");
            total += p;
        }
        if (total <= 0.0) throw InvalidInputError("Rng::categorical: zero-mass distribution");
        double r = next_double() * total;
        double cum = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            cum += probs[k];
            if (r < cum) return static_cast<int>(k);
        }
        // r landed on the floating-point tail; return the last positive-mass index.
        for (std::size_t k = probs.size(); k-- > 0;) {
            if (probs[k] > 0.0) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = next_below(i + 1);
            std::swap(v[i], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
};

} // namespace fairsched
