#pragma once

// Calibration decision procedures built on the debiased plug-in statistic:
// the fixed-scale test, the Bonferroni multi-scale (adaptive) test, the
// composite-null variant, plus baselines (exact binomial test for discrete
// predictors, logistic score test) and top-1 binarization.

#include <cstdint>
#include <vector>

#include "tcal/estimators.hpp"
#include "tcal/report.hpp"
#include "tcal/resampling.hpp"
#include "tcal/sample.hpp"

namespace tcal {

// Rate-optimal bin count for smoothness s: floor(n^{2/(4s+K-1)}), at least 1.
std::uint32_t optimal_bins(std::size_t n, double s, std::uint32_t K);

// Conservative closed-form critical value for the debiased statistic:
// (sqrt(2) K / sqrt(alpha)) * min(m^{(K-1)/2} / n, m^{-(K-1)/2}).
double tcal_analytic_threshold(std::uint32_t K, double alpha, std::uint32_t m,
                               std::size_t n);

// Composite-null ("small enough mis-calibration") threshold; reduces to the
// fixed-test threshold at c0 = 0.
double tcal_composite_threshold(std::uint32_t K, double alpha, std::uint32_t m,
                                std::size_t n, double c0, double s);

// Number of dyadic scales B = ceil((2/(K-1)) log2(n / sqrt(ln n))), n >= 3,
// and the grid {2^1, ..., 2^B}.
std::uint32_t adaptive_num_scales(std::size_t n, std::uint32_t K);
std::vector<std::uint32_t> adaptive_grid(std::size_t n, std::uint32_t K);

enum class CvSource { Analytic, OracleMC, Consistency, YOnly };

struct CriticalValueSpec {
    CvSource source = CvSource::Consistency;
    int num_resamples = 999;
    std::uint64_t seed = 0;
    // Required for OracleMC: the known calibrated law generating Z.
    const SyntheticModel* oracle_model = nullptr;
};

const char* cv_source_name(CvSource s);

// Debiased plug-in test at a single scale m. reject <=> statistic >= cv.
TestReport tcal_fixed(const CalibrationSample& s, std::uint32_t m, double alpha,
                      const CriticalValueSpec& cv);

// OR over the dyadic grid, each scale at level alpha/B. With resampled
// critical values one replicate set is shared across scales; if the caller's
// resample count cannot express level alpha/B it is raised to the smallest
// feasible count (recorded as a warning).
TestReport tcal_adaptive(const CalibrationSample& s, double alpha,
                         const CriticalValueSpec& cv);

TestReport tcal_composite(const CalibrationSample& s, std::uint32_t m, double alpha,
                          double c0, double smoothness);

// Two-sided exact binomial p-value (minimum-likelihood convention) of
// M successes out of N at success probability v.
double binomial_two_sided_p(double v, std::uint64_t N, std::uint64_t M);

// Bonferroni-combined exact binomial test across discrete predictor groups.
// NOTE: statistic = min p-value; this test rejects when statistic <=
// critical_value (= alpha / #groups), unlike the threshold tests above.
TestReport discrete_binomial_test(const std::vector<DiscreteGroup>& groups, double alpha);

// Score test of the logistic recalibration null (intercept 0, slope 1), with
// Monte-Carlo critical values: Z resampled from the empirical distribution,
// Y ~ Bernoulli(Z).
TestReport logistic_score_test(const BinarySample& b, double alpha, int mc_reps, Rng& rng);

// Top-1 reduction: confidence = max_k z_k (ties -> lowest index), outcome =
// "argmax equals the true class".
BinarySample binarize_top1(const CalibrationSample& s);

} // namespace tcal
