#pragma once

// Two-sample goodness-of-fit tests on the unit cube and the calibration test
// obtained by sample splitting.
//
// Both two-sample statistics live on the regular grid that cuts [0,1]^d into
// m^d congruent cells (coordinate 1.0 folds into the last cell):
//   * chi2_statistic:  Gamma = sum_cells (n2*a_c - n1*b_c)^2, where a_c, b_c
//     count the points of V and W in cell c.  Symmetric in (V, W) when the
//     roles of (n1, a) and (n2, b) are swapped alongside.
//   * u_statistic: the unbiased two-sample U-statistic with the four-point
//     kernel k_m(v1,v2,w1,w2) = 1{v1~v2} + 1{w1~w2} - 1{v1~w2} - 1{v2~w1},
//     where x~y means "same grid cell".  Equals, in counting form,
//     sum_c a(a-1)/(n1(n1-1)) + b(b-1)/(n2(n2-1)) - 2ab/(n1 n2).
//
// The permutation tests calibrate the U-statistic by relabeling the pooled
// sample.  Rejection uses the tie-safe rule: with R permutations, reject iff
// (1 + #{permuted >= observed}) / (R + 1) <= level.  The (1-level) order
// statistic of the permuted values is still reported as critical_value.
//
// The splitting test reduces "is the classifier calibrated?" to K two-sample
// problems: for each class k it compares the predictions that accompany real
// label k in the first half against predictions that accompany a synthetic
// label k (drawn from the prediction itself) in the second half, plus two
// cheap moment screens.  Points enter the two-sample test through the chart
// that drops the last simplex coordinate, so d = K-1.

#include "tcal/common.hpp"
#include "tcal/report.hpp"
#include "tcal/sample.hpp"
#include "tcal/synthetic.hpp"

#include <cstdint>
#include <vector>

namespace tcal {

struct TwoSampleInput {
    std::size_t d = 0;
    std::vector<double> V; // n1 x d, row-major
    std::vector<double> W; // n2 x d, row-major

    std::size_t n1() const { return d == 0 ? 0 : V.size() / d; }
    std::size_t n2() const { return d == 0 ? 0 : W.size() / d; }
};

// m^d, throwing when it does not fit in 64 bits.
std::uint64_t cube_cell_count(std::uint32_t m, std::size_t d);

// 0-based index of the grid cell containing x (coordinates in [0,1];
// the closed upper face belongs to the last cell along its axis).
std::uint64_t cube_cell_index(const double* x, std::size_t d, std::uint32_t m);

double chi2_statistic(const TwoSampleInput& in, std::uint32_t m);
double u_statistic(const TwoSampleInput& in, std::uint32_t m);

// Four-point kernel of the U-statistic; exposed for direct checks of the
// counting identity and of the symmetry k(v1,v2,w1,w2) = k(w1,w2,v1,v2).
double u_kernel(const double* v1, const double* v2, const double* w1,
                const double* w2, std::size_t d, std::uint32_t m);

// Grid scale floor((n1 ^ n2)^(2/(4s+d))) tuned to smoothness s, at least 1.
std::uint32_t two_sample_optimal_bins(std::size_t n1, std::size_t n2, double s,
                                      std::size_t d);

// Number of dyadic scales ceil((2/d) * log2((n1^n2)/loglog(n1^n2))).
std::uint32_t two_sample_num_scales(std::size_t n1, std::size_t n2, std::size_t d);

// U-statistic permutation test at a single grid scale.  num_perms is raised
// (with a warning in the report) when too small for rejection at alpha to be
// possible.
TestReport permutation_u_test(const TwoSampleInput& in, std::uint32_t m,
                              double alpha, int num_perms, Rng& rng);

// Runs the permutation test at scales 2, 4, ..., 2^B, each at level alpha/B,
// reusing one set of pooled-label permutations across scales; rejects iff any
// scale rejects.  Requires n1 ^ n2 >= 16.
TestReport multiscale_permutation_test(const TwoSampleInput& in, double alpha,
                                       int num_perms, Rng& rng);

// Which two-sample statistic the splitting test uses for its per-class
// comparison, and how it is calibrated.
enum class TsChoice {
    Permutation, // U-statistic with permutation critical values (default)
    Chi2MC,      // chi-squared statistic against precomputed Monte-Carlo
                 // critical values from a known calibrated model
};

// Per-class critical values for TsChoice::Chi2MC, obtained by simulating the
// full splitting pipeline under a calibrated model.
struct SplitChi2Calibration {
    std::size_t n = 0;               // sample size (after any odd-size drop)
    std::vector<double> critical;    // one threshold per class
};

SplitChi2Calibration calibrate_split_chi2(const SyntheticModel& null_model,
                                          std::size_t n, double alpha,
                                          double smoothness, int num_sims,
                                          std::uint64_t seed);

struct SplitOptions {
    double beta = 0.5;        // nominal type II target; enters reporting only
    double smoothness = 1.0;  // picks the two-sample grid scale
    TsChoice ts = TsChoice::Permutation;
    int num_perms = 300;
    const SplitChi2Calibration* chi2_calibration = nullptr; // for Chi2MC
};

// Splitting calibration test.  Drops one observation when n is odd, draws a
// synthetic label from each second-half prediction, and rejects iff for some
// class one of the two moment screens |T1_k|, |T2_k| >= sqrt(3K/(alpha n)) or
// the class's two-sample test at level alpha/(3K) rejects.  Classes whose
// point sets have fewer than 2 members skip the two-sample branch with a
// warning.  The full per-class trace lands in report.split.
TestReport splitting_calibration_test(const CalibrationSample& s, double alpha,
                                      const SplitOptions& opt, Rng& rng);

// Per-class two-sample statistics without any calibration step, for
// distributional diagnostics: the single-split value and the cross-fitted
// average.  Entries are NaN for classes whose point sets are too small.
std::vector<double> split_class_statistics(const CalibrationSample& s,
                                           double smoothness, TsChoice ts,
                                           Rng& rng);
std::vector<double> cross_fit_class_statistics(const CalibrationSample& s,
                                               double smoothness, TsChoice ts,
                                               Rng& rng);

struct CrossFitOptions {
    double beta = 0.5;
    double smoothness = 1.0;
    TsChoice ts = TsChoice::Permutation; // statistic family: U (default) or chi2
    int num_sims = 1000;                 // Monte-Carlo size for critical values
    // When set, critical values come from fresh samples of this calibrated
    // model; otherwise from consistency resampling of the observed sample.
    const SyntheticModel* null_model = nullptr;
};

// Cross-fitted variant: the two-sample statistic is computed twice with the
// halves' roles swapped (a fresh synthetic label set is drawn each time a
// half plays the synthetic role) and the two values are averaged per class.
// Per-class critical values are Monte-Carlo quantiles of the same averaged
// statistic at level alpha/(3K) under the resampled or oracle null.  The two
// moment screens are kept unchanged.
TestReport cross_fit_splitting_test(const CalibrationSample& s, double alpha,
                                    const CrossFitOptions& opt, Rng& rng);

} // namespace tcal
