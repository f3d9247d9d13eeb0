#pragma once

// Critical values by resampling. Three schemes, differing in what is redrawn
// per replicate:
//
//   oracle       Z~ fresh from the (known) null model, Y~ ~ Cat(Z~)
//   consistency  Z~ uniform with replacement from the observed Z, Y~ ~ Cat(Z~)
//   y_only       Z~ = Z fixed, Y~ ~ Cat(Z)
//
// The threshold is the ceil((1-alpha)(N+1))-th order statistic of the N
// replicate statistics. For y_only (and oracle) the observed statistic is
// exchangeable with the replicates under the null, so rejection at that
// threshold has exact level floor(alpha(N+1))/(N+1) <= alpha. When that floor
// is 0 the test cannot reject at all; callers are told via `feasible`.
//
// Replicates use seeds derived per replicate index, so the result is
// independent of thread count.

#include <cstdint>
#include <vector>

#include "tcal/common.hpp"
#include "tcal/estimators.hpp"
#include "tcal/sample.hpp"
#include "tcal/synthetic.hpp"

namespace tcal {

enum class StatKind { Biased, Debiased, L1 };

struct ScaleStat {
    std::uint32_t m = 0;
    StatKind kind = StatKind::Debiased;
};

// Replicate-by-request matrices (row r = replicate, column j = request),
// flattened row-major. Partitions are deduplicated internally, so asking for
// several statistics at one scale costs a single aggregation pass.
std::vector<double> oracle_replicates(const SyntheticModel& null_model, std::size_t n,
                                      const std::vector<ScaleStat>& requests, int N,
                                      std::uint64_t master_seed);
std::vector<double> consistency_replicates(const CalibrationSample& s,
                                           const std::vector<ScaleStat>& requests, int N,
                                           std::uint64_t master_seed);
std::vector<double> yonly_replicates(const CalibrationSample& s,
                                     const std::vector<ScaleStat>& requests, int N,
                                     std::uint64_t master_seed);

struct OrderStatResult {
    double threshold = 0.0;
    bool feasible = true;       // false -> no rejection possible at this alpha
    double achieved_level = 0.0; // floor(alpha(N+1))/(N+1)
};

// `values` is consumed (partially sorted in place).
OrderStatResult order_stat_threshold(std::vector<double>& values, double alpha);

// Single-statistic conveniences matching the three schemes. The caller's rng
// supplies one master seed; everything downstream is derived from it.
double oracle_mc_critical(const SyntheticModel& null_model, StatKind stat, std::uint32_t m,
                          std::size_t n, double alpha, int N, Rng& rng);
double consistency_resample_critical(const CalibrationSample& s, StatKind stat,
                                     std::uint32_t m, double alpha, int N, Rng& rng);
double y_only_critical(const CalibrationSample& s, StatKind stat, std::uint32_t m,
                       double alpha, int N, Rng& rng);

} // namespace tcal
