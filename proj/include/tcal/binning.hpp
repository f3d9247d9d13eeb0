#pragma once

// Equal-volume partition of the probability simplex and point-to-bin
// assignment.
//
// Construction: work in cumulative coordinates c_j = z_1 + ... + z_j,
// j = 1..K-1, which map the simplex onto the set {0 <= c_1 <= ... <= c_d <= 1}.
// Scale by m and split each axis-aligned grid cell by the descending order of
// the fractional parts (the Kuhn/Freudenthal triangulation). Every cell is a
// translate of a unit simplex of the subdivision, so all m^{K-1} cells have
// equal volume, and cell diameters are O(1/m).
//
// Cell numbering: a cell is identified by (u, w) where u = floor coordinates
// and w = the descending order of the fractional parts. Reading the floor of
// each position in w-order (digit i = u[w[i]], ties in the fractional sort
// broken by descending position index) yields a string in {0..m-1}^{K-1}.
// Cumulative coordinates are nondecreasing, so positions with equal floors
// appear in w in a forced relative order; the string therefore determines
// (u, w) uniquely, and by the P-partition count there are exactly m^{K-1}
// cells — the map is a bijection. We rank the string in mixed radix m to get
// a bin index in {1..m^{K-1}} with no lookup tables and O(K log K) work.

#include <cstdint>

#include "tcal/common.hpp"

namespace tcal {

struct Partition {
    std::uint32_t m = 0;
    std::uint32_t K = 0;
    std::uint64_t cell_count = 0;
};

// Throws InvalidArgumentError for m = 0, K < 2, or m^{K-1} overflowing uint64
// (a regime with more cells than any dataset could ever populate).
Partition build_partition(std::uint32_t m, std::uint32_t K);

// 1-based bin index. Validates z (coords >= -1e-9, sum within 1e-9 of 1).
std::uint64_t assign_bin(const Partition& p, const double* z);

// Hot-path variant: assumes z was already validated/clamped (see
// validate_sample). Still total — boundary values fold into the last cell.
std::uint64_t assign_bin_unchecked(const Partition& p, const double* z);

// Eulerian number A_{u-1, v-1} (permutations of u-1 elements with v-1
// descents), via the alternating-sum formula in exact integer arithmetic.
// Requires 1 <= v <= u-1; throws on out-of-range v or uint64 overflow.
std::uint64_t eulerian(std::uint32_t u, std::uint32_t v);

// Independent cell count through the hypersimplex decomposition:
// sum_{j=0}^{K-2} binom(m+j, K-1) * A_{K-1, j}. Equals m^{K-1} by Worpitzky's
// identity; kept as an arithmetic cross-check of the partition size.
std::uint64_t worpitzky_cell_count(std::uint32_t m, std::uint32_t K);

} // namespace tcal
