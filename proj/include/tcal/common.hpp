#pragma once

// Shared infrastructure: error taxonomy, reproducible RNG streams, compensated
// summation, and a deterministic parallel map. Everything downstream assumes the
// determinism contract established here: a (master seed, stream id) pair fully
// determines a random stream, independent of thread count or platform.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcal {

// ---------------------------------------------------------------------------
// Errors. All validation failures funnel through these so the CLI can map them
// to exit codes uniformly (usage -> 2, runtime -> 1).

struct InvalidArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Design too degenerate to fit/test (e.g. singular information matrix with a
// nonzero score). Distinct from DataError so callers can special-case it.
struct DegenerateDesignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// RNG. We need (a) exact reproducibility across platforms and thread counts,
// (b) cheap derivation of statistically independent substreams. splitmix64 is
// the standard seed-scrambling choice; mt19937_64 runs the streams.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream `id` under a master seed. id 0 is distinct from the master itself.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id) {
    return splitmix64(master + 0x9E3779B97F4A7C15ULL * (id + 1));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream_id) {
    return Rng(derive_seed(master, stream_id));
}

// Uniform on [0,1) built from the top 53 bits. We avoid
// std::uniform_real_distribution because its output is not pinned by the
// standard and varies across library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Integer in [0, n). Rejection sampling keeps it exactly uniform: accept only
// draws below the largest multiple of n that fits in 64 bits.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    if (n == 0) throw InvalidArgumentError("uniform_below: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t overflow = (max % n + 1) % n; // 2^64 mod n
    if (overflow == 0) return rng() % n;
    const std::uint64_t limit = max - overflow; // last accepted value
    for (;;) {
        std::uint64_t v = rng();
        if (v <= limit) return v % n;
    }
}

// ---------------------------------------------------------------------------
// Kahan-compensated accumulator. The debiased statistic lives or dies on exact
// cancellation (singleton bins must contribute 0 to the last ulp), so bin
// aggregates use compensated sums throughout.

struct KahanSum {
    double sum = 0.0;
    double c = 0.0;

    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// ---------------------------------------------------------------------------
// Deterministic parallelism. Work items are indexed; any per-item randomness
// must come from a seed derived from the item index, never from thread-local
// state. That makes the multiset of results independent of the thread count.

void set_max_threads(int n);   // 0 or negative -> hardware default
int max_threads();

// Runs fn(i) for i in [0, n). Exceptions propagate (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace tcal
