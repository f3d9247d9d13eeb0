#pragma once

// Common result record for every decision procedure in the library. Single-
// scale tests fill statistic/critical_value directly; multi-scale tests also
// fill `scales` and the decision is the OR over scales. The `trace` block
// carries enough detail to audit randomized internals (e.g. which half of the
// sample received randomized labels in the splitting test).

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace tcal {

struct TestReport {
    std::string method;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double critical_value = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.0;
    bool reject = false;

    std::vector<std::uint32_t> bins; // single m, or the scale grid
    std::size_t n = 0;
    std::uint32_t K = 0;
    std::uint64_t seed = 0;
    std::string source; // analytic | oracle | consistency | yonly | permutation | mc

    // optional metadata
    double beta = std::numeric_limits<double>::quiet_NaN();
    double smoothness = std::numeric_limits<double>::quiet_NaN();
    double achieved_level = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;

    struct Scale {
        std::uint32_t m = 0;
        double statistic = 0.0;
        double critical_value = 0.0;
        bool reject = false;
    };
    std::vector<Scale> scales;
    int first_reject_scale = 0; // 1-based b of the first rejecting scale, 0 if none

    // splitting-test audit trace
    struct SplitClass {
        double t1 = 0.0, t2 = 0.0;
        bool t1_fire = false, t2_fire = false, ts_fire = false;
        bool ts_skipped = false; // V_k or W_k too small
        std::size_t v_size = 0, w_size = 0;
        double ts_statistic = std::numeric_limits<double>::quiet_NaN();
        double ts_critical = std::numeric_limits<double>::quiet_NaN();
    };
    struct SplitTrace {
        std::size_t split_at = 0;              // first half = [0, split_at)
        std::size_t dropped = 0;               // 1 if n was odd
        std::vector<std::uint32_t> ytilde;     // randomized labels, second half only
        std::vector<SplitClass> classes;
    };
    SplitTrace split;
};

} // namespace tcal
