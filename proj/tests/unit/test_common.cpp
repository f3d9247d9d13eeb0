#include <doctest.h>

#include "tcal/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

using namespace tcal;

TEST_SUITE("common") {

TEST_CASE("derive_seed is stable and separates streams") {
    CHECK(derive_seed(42, 0) == derive_seed(42, 0));
    CHECK(derive_seed(42, 0) != derive_seed(42, 1));
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));
    CHECK(derive_seed(42, 0) != 42);

    std::set<std::uint64_t> seen;
    for (std::uint64_t id = 0; id < 4096; ++id) seen.insert(derive_seed(7, id));
    CHECK(seen.size() == 4096); // no collisions across the first 4k streams
}

TEST_CASE("make_rng reproduces the same stream") {
    Rng a = make_rng(5, 7);
    Rng b = make_rng(5, 7);
    for (int i = 0; i < 64; ++i) CHECK(a() == b());
    Rng c = make_rng(5, 8);
    CHECK(c() != make_rng(5, 7)());
}

TEST_CASE("uniform01 stays in [0,1) and fills the range") {
    Rng rng = make_rng(1, 0);
    double lo = 1.0, hi = 0.0;
    bool in_range = true;
    for (int i = 0; i < 100000; ++i) {
        double u = uniform01(rng);
        in_range = in_range && u >= 0.0 && u < 1.0;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(in_range);
    CHECK(lo < 1e-4);
    CHECK(hi > 1.0 - 1e-4);
}

TEST_CASE("uniform_below is uniform over a non-power-of-two range") {
    Rng rng = make_rng(2, 0);
    const std::uint64_t n = 3;
    const int draws = 90000;
    std::vector<int> cnt(n, 0);
    for (int i = 0; i < draws; ++i) ++cnt[uniform_below(rng, n)];
    const double expect = draws / 3.0;
    const double sd = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
    for (std::uint64_t k = 0; k < n; ++k)
        CHECK(std::abs(cnt[k] - expect) < 5 * sd);
}

TEST_CASE("uniform_below edge cases") {
    Rng rng = make_rng(3, 0);
    CHECK(uniform_below(rng, 1) == 0);
    CHECK_THROWS_AS(uniform_below(rng, 0), InvalidArgumentError);
    bool ok = true;
    for (int i = 0; i < 4096; ++i) ok = ok && uniform_below(rng, 8) < 8;
    for (int i = 0; i < 4096; ++i) ok = ok && uniform_below(rng, 7) < 7;
    CHECK(ok);
}

TEST_CASE("KahanSum does not drift under repeated small additions") {
    KahanSum k;
    double naive = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        k.add(0.1);
        naive += 0.1;
    }
    // true sum of the double nearest 0.1, a million times, is 100000 + ~5.6e-12
    CHECK(std::abs(k.value() - 100000.0) < 1e-10);
    CHECK(std::abs(k.value() - 100000.0) <= std::abs(naive - 100000.0));
}

TEST_CASE("parallel_for covers every index exactly once at any width") {
    for (int threads : {1, 3, 8}) {
        set_max_threads(threads);
        const std::size_t n = 1000;
        std::vector<std::atomic<int>> hits(n);
        parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
        bool all_once = true;
        for (auto& h : hits) all_once = all_once && h.load() == 1;
        CHECK(all_once);
    }
    set_max_threads(0);
}

TEST_CASE("parallel_for propagates the worker exception") {
    set_max_threads(4);
    CHECK_THROWS_AS(parallel_for(100,
                                 [](std::size_t i) {
                                     if (i == 37) throw DataError("boom");
                                 }),
                    DataError);
    set_max_threads(0);
}

TEST_CASE("parallel_for handles empty and single-item ranges") {
    int calls = 0;
    parallel_for(0, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
    std::atomic<int> one{0};
    parallel_for(1, [&](std::size_t) { one.fetch_add(1); });
    CHECK(one.load() == 1);
}

} // TEST_SUITE
