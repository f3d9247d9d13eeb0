#pragma once

// Plug-in calibration-error statistics over a simplex partition.
//
// With I_i the indices falling in bin i, S_i = sum_{j in I_i} (Y_j - Z_j) and
// Q_i = sum_{j in I_i} ||Y_j - Z_j||^2:
//
//   biased     T^b  = sum_i ||S_i||^2 / (n N_i)
//   debiased   T^d  = sum_i (||S_i||^2 - Q_i) / (n N_i)
//   l1         T^l1 = sum_i ||S_i||_1 / n
//
// sums over occupied bins only. The debiasing term makes every bin's
// contribution mean-zero under perfect calibration; bins with a single point
// contribute exactly 0 (enforced to the last ulp by matching the arithmetic
// order of ||S_i||^2 and Q_i for singleton bins).

#include <cstdint>
#include <vector>

#include "tcal/binning.hpp"
#include "tcal/common.hpp"
#include "tcal/sample.hpp"

namespace tcal {

// Per-bin sufficient statistics (occupied bins only, in first-touch order).
struct BinnedAggregates {
    std::size_t n = 0;
    std::uint32_t K = 0;
    std::vector<std::uint64_t> bin_id;  // 1-based partition indices
    std::vector<std::uint64_t> count;   // N_i
    std::vector<double> sum_diff;       // num_bins x K, row-major: S_i
    std::vector<double> sum_sq;         // Q_i

    std::size_t num_bins() const { return bin_id.size(); }
};

BinnedAggregates aggregate(const CalibrationSample& s, const Partition& p);

struct PluginStats {
    double biased = 0.0;
    double debiased = 0.0;
    double l1 = 0.0;
};

PluginStats plugin_stats(const BinnedAggregates& agg);
PluginStats plugin_stats(const CalibrationSample& s, const Partition& p);

double biased_plugin(const CalibrationSample& s, const Partition& p);
double debiased_plugin(const CalibrationSample& s, const Partition& p);
double l1_plugin(const CalibrationSample& s, const Partition& p);

// Histogram l1-ECE on equal-width confidence bins (the ubiquitous empirical
// ECE with 15 bins): sum_i (N_i/n) |mean(y) - mean(z)| over bins of [0,1].
double empirical_ece_guo(const BinarySample& b, std::uint32_t num_bins = 15);

// Debiased squared l2-ECE for predictors taking finitely many values; each
// group is (predicted value v, group size N, positive count M). Requires
// every N >= 2 for the unbiased within-group variance correction.
struct DiscreteGroup {
    double v = 0.0;
    std::uint64_t N = 0;
    std::uint64_t M = 0;
};

double debiased_discrete_l2ece(const std::vector<DiscreteGroup>& groups);

// ---------------------------------------------------------------------------
// Fast re-evaluation machinery for bootstrap/Monte-Carlo loops. Binning a
// fixed prediction set is done once; replicates that only change labels (or
// resample points with replacement from the same set) are then O(n).

class BinnedDesign {
  public:
    BinnedDesign(const CalibrationSample& s, const Partition& p);

    std::uint32_t num_slots() const { return nslots_; }
    const std::vector<std::uint32_t>& slot() const { return slot_; }

    // Statistics when point i carries label labels[i] (same Z as the design).
    PluginStats stats_with_labels(const std::uint32_t* labels) const;

    // Statistics for the bootstrap sample {(Z_idx[i], labels[i])}, idx with
    // replacement from the design points.
    PluginStats stats_resampled(const std::uint32_t* idx, const std::uint32_t* labels,
                                std::size_t count) const;

  private:
    const CalibrationSample* s_;
    std::uint32_t K_;
    std::uint32_t nslots_ = 0;
    std::vector<std::uint32_t> slot_;       // per point
    std::vector<std::uint32_t> base_count_; // per slot: N_i of the design Z
    std::vector<double> base_sum_z_;        // per slot x K: sum of Z rows
    std::vector<double> point_zsq_;         // per point: sum_k z_k^2

    // scratch reused across calls (one design per thread of execution)
    mutable std::vector<double> acc_;       // nslots x K label counts
    mutable std::vector<double> q_;         // nslots
    mutable std::vector<double> sz_;        // nslots x K resampled sum of Z
    mutable std::vector<std::uint32_t> cnt_;
    mutable std::vector<std::uint32_t> touched_;
};

} // namespace tcal
