#include "tcal/binning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace tcal {

namespace {

constexpr double kSimplexTol = 1e-9;

// Exact m^{K-1} with overflow detection.
bool pow_u64(std::uint64_t base, std::uint32_t exp, std::uint64_t& out) {
    unsigned __int128 acc = 1;
    for (std::uint32_t i = 0; i < exp; ++i) {
        acc *= base;
        if (acc > std::numeric_limits<std::uint64_t>::max()) return false;
    }
    out = static_cast<std::uint64_t>(acc);
    return true;
}

unsigned __int128 binom128(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i; // product of i consecutive ints divisible by i!
    }
    return r;
}

} // namespace

Partition build_partition(std::uint32_t m, std::uint32_t K) {
    if (m == 0) throw InvalidArgumentError("build_partition: m must be positive");
    if (K < 2) throw InvalidArgumentError("build_partition: K must be at least 2");
    Partition p;
    p.m = m;
    p.K = K;
    if (!pow_u64(m, K - 1, p.cell_count))
        throw InvalidArgumentError("build_partition: m^(K-1) exceeds 64-bit range");
    return p;
}

std::uint64_t assign_bin_unchecked(const Partition& p, const double* z) {
    const std::uint32_t d = p.K - 1;
    const double m = static_cast<double>(p.m);

    // Small-dimension fast storage; falls back to heap only for huge K.
    std::array<std::uint32_t, 16> ubuf;
    std::array<double, 16> fbuf;
    std::array<std::uint32_t, 16> wbuf;
    std::vector<std::uint32_t> uheap;
    std::vector<double> fheap;
    std::vector<std::uint32_t> wheap;
    std::uint32_t* u = ubuf.data();
    double* f = fbuf.data();
    std::uint32_t* w = wbuf.data();
    if (d > 16) {
        uheap.resize(d);
        fheap.resize(d);
        wheap.resize(d);
        u = uheap.data();
        f = fheap.data();
        w = wheap.data();
    }

    double c = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) {
        c += z[j];
        double scaled = m * std::min(c, 1.0);
        double fl = std::floor(scaled);
        std::uint32_t uj = static_cast<std::uint32_t>(fl);
        if (uj >= p.m) uj = p.m - 1; // fold upper boundary into last cell
        u[j] = uj;
        f[j] = scaled - static_cast<double>(uj);
        w[j] = j;
    }

    // Descending fractional parts; ties broken by descending position.
    std::sort(w, w + d, [&](std::uint32_t a, std::uint32_t b) {
        if (f[a] != f[b]) return f[a] > f[b];
        return a > b;
    });

    // Digit i is the floor coordinate of the position holding the i-th
    // largest fractional part. Because the cumulative coordinates are
    // nondecreasing, positions sharing a floor value are forced into a fixed
    // relative order in w, so the digit string determines the cell uniquely;
    // ranking it in mixed radix m gives the bijection onto {0..m^{K-1}-1}.
    std::uint64_t index = 0;
    std::uint64_t radix = 1;
    for (std::uint32_t i = 0; i < d; ++i) {
        index += static_cast<std::uint64_t>(u[w[i]]) * radix;
        radix *= p.m;
    }
    return index + 1;
}

std::uint64_t assign_bin(const Partition& p, const double* z) {
    double sum = 0.0;
    for (std::uint32_t k = 0; k < p.K; ++k) {
        if (!(z[k] >= -kSimplexTol))
            throw DataError("assign_bin: negative coordinate");
        sum += z[k];
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        throw DataError("assign_bin: coordinates sum to " + std::to_string(sum));
    return assign_bin_unchecked(p, z);
}

std::uint64_t eulerian(std::uint32_t u, std::uint32_t v) {
    if (u < 2) throw InvalidArgumentError("eulerian: u must be at least 2");
    if (v < 1 || v > u - 1)
        throw InvalidArgumentError("eulerian: v out of range [1, u-1]");
    if (u > 22)
        throw InvalidArgumentError("eulerian: u too large for exact 64-bit result");

    // A_{u-1, v-1} = sum_{i=0}^{v} (-1)^i binom(u, i) (v-i)^{u-1}
    unsigned __int128 pos = 0, neg = 0;
    for (std::uint32_t i = 0; i <= v; ++i) {
        unsigned __int128 base = v - i;
        unsigned __int128 pw = 1;
        const unsigned __int128 lim = ~(unsigned __int128)0;
        for (std::uint32_t e = 0; e + 1 < u; ++e) {
            if (base != 0 && pw > lim / base)
                throw InvalidArgumentError("eulerian: intermediate overflow");
            pw *= base;
        }
        unsigned __int128 term = binom128(u, i) * pw;
        if (i % 2 == 0) pos += term; else neg += term;
    }
    if (pos < neg) throw InvalidArgumentError("eulerian: negative result (overflow)");
    unsigned __int128 res = pos - neg;
    if (res > std::numeric_limits<std::uint64_t>::max())
        throw InvalidArgumentError("eulerian: result exceeds 64-bit range");
    return static_cast<std::uint64_t>(res);
}

std::uint64_t worpitzky_cell_count(std::uint32_t m, std::uint32_t K) {
    if (m == 0) throw InvalidArgumentError("worpitzky_cell_count: m must be positive");
    if (K < 2) throw InvalidArgumentError("worpitzky_cell_count: K must be at least 2");
    unsigned __int128 total = 0;
    for (std::uint32_t j = 0; j + 1 < K; ++j) {
        // A_{K-1, j} in the spec's offset convention is eulerian(K, j+1).
        unsigned __int128 term = binom128(m + j, K - 1) * (unsigned __int128)eulerian(K, j + 1);
        total += term;
        if (total > std::numeric_limits<std::uint64_t>::max())
            throw InvalidArgumentError("worpitzky_cell_count: overflow");
    }
    return static_cast<std::uint64_t>(total);
}

} // namespace tcal
