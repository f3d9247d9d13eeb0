#pragma once

// Monte-Carlo experiment driver: power curves (type II error of a calibration
// test against a grid of bump alternatives) and the detection-rate study (the
// finest alternative scale m(n) each sample size can still detect, and the
// log-log slope of the implied separation eps_n).
//
// Determinism contract: the full result, including every emitted artifact
// byte, is a function of (config, seed) alone.  Trials and replicates run on
// derived per-index streams, so thread count never changes the outcome.

#include "tcal/common.hpp"
#include "tcal/estimators.hpp"
#include "tcal/resampling.hpp"
#include "tcal/synthetic.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tcal {

struct PowerConfig {
    // alternative model grid
    ModelFamily family = ModelFamily::Oscillating;
    std::uint32_t K = 2;
    double s = 0.3;
    double rho = 50.0;
    std::vector<std::uint32_t> alt_m; // alternative bump scales (grid)

    // test under study: plug-in statistic at a fixed binning, critical value
    // from fresh null samples (oracle Monte Carlo)
    StatKind stat = StatKind::Debiased;
    std::uint32_t test_m = 0; // 0 -> optimal binning for (n, s, K)
    int cv_resamples = 1000;

    std::size_t n = 10000;
    int trials = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 1;
};

struct PowerRow {
    std::uint32_t m = 0; // alternative scale
    double ece = 0.0;    // analytic l2 calibration error of the alternative
    double type2 = 0.0;  // estimated type II error (acceptance rate)
    double se = 0.0;     // binomial standard error sqrt(t2 (1-t2) / trials)
};

struct PowerCurve {
    PowerConfig config;
    std::uint32_t test_m = 0;      // binning actually used by the test
    double critical_value = 0.0;
    std::vector<PowerRow> rows;    // sorted by ece, ascending
};

PowerCurve run_power_experiment(const PowerConfig& cfg);

// CSV with header "ece,type2,se" (one row per grid point) and a JSON manifest
// echoing the config, the critical value, and the rows.  Both are
// byte-deterministic functions of the curve.
void write_power_csv(const PowerCurve& curve, std::ostream& os);
void write_power_manifest(const PowerCurve& curve, std::ostream& os);

struct RateConfig {
    ModelFamily family = ModelFamily::Oscillating;
    std::uint32_t K = 2;
    double s = 0.5;
    double rho = 50.0;

    std::vector<std::size_t> n_grid;
    int trials = 200;          // per type-II estimate during the search
    double alpha = 0.05;
    double type2_target = 0.05;
    int cv_resamples = 1000;
    std::uint64_t seed = 1;

    // search bounds for the alternative scale; the lower bound is raised
    // automatically to the smallest m for which the model is constructible
    std::uint32_t m_min = 4;
    std::uint32_t m_max = 1u << 20;
};

struct RatePoint {
    std::size_t n = 0;
    std::uint32_t test_m = 0;  // binning of the test at this n
    std::uint32_t m_detect = 0; // largest m with estimated type II < target
    double eps = 0.0;           // rho * ||zeta||_2 * m_detect^{-s}
    bool censored = false;      // search hit a bound; eps not usable
};

struct RateResult {
    RateConfig config;
    std::vector<RatePoint> points;
    double slope = 0.0; // least-squares slope of log(eps) on log(n); NaN if
                        // fewer than 2 uncensored points
};

RateResult run_detection_rate_experiment(const RateConfig& cfg);

// CSV with header "n,m,eps,censored" plus a JSON manifest with the slope.
void write_rate_csv(const RateResult& result, std::ostream& os);
void write_rate_manifest(const RateResult& result, std::ostream& os);

// Smallest alternative scale m for which the family is constructible at
// (s, rho) — bump amplitudes must keep the regression inside the simplex.
std::uint32_t min_valid_alt_scale(ModelFamily family, std::uint32_t K, double s,
                                  double rho);

// Builds the grid alternative for a family (example1 rounds m internally).
SyntheticModel make_alternative(ModelFamily family, std::uint32_t K,
                                std::uint32_t m, double s, double rho);

} // namespace tcal
