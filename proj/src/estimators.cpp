#include "tcal/estimators.hpp"

#include <cmath>
#include <unordered_map>

namespace tcal {

namespace {

// Observed-bin discovery shared by aggregate() and BinnedDesign: dense
// direct-address table when the partition is small enough, hashing otherwise.
class SlotMap {
  public:
    SlotMap(std::uint64_t cell_count, std::size_t n) {
        dense_ = cell_count <= std::max<std::uint64_t>(4 * n, 1u << 20);
        if (dense_) table_.assign(cell_count, kEmpty);
    }

    std::uint32_t slot_for(std::uint64_t bin, std::uint32_t& next) {
        if (dense_) {
            std::uint32_t& e = table_[bin - 1];
            if (e == kEmpty) e = next++;
            return e;
        }
        auto [it, inserted] = map_.try_emplace(bin, next);
        if (inserted) ++next;
        return it->second;
    }

  private:
    static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;
    bool dense_ = false;
    std::vector<std::uint32_t> table_;
    std::unordered_map<std::uint64_t, std::uint32_t> map_;
};

} // namespace

BinnedAggregates aggregate(const CalibrationSample& s, const Partition& p) {
    if (s.n == 0) throw DataError("aggregate: empty sample");
    if (s.K != p.K)
        throw InvalidArgumentError("aggregate: sample and partition disagree on K");

    const std::uint32_t K = p.K;
    BinnedAggregates agg;
    agg.n = s.n;
    agg.K = K;

    SlotMap slots(p.cell_count, s.n);
    std::uint32_t next = 0;
    std::vector<double> comp_diff; // Kahan compensation, per slot x K
    std::vector<double> comp_sq;   // per slot

    for (std::size_t i = 0; i < s.n; ++i) {
        const double* z = s.row(i);
        const std::uint64_t bin = assign_bin_unchecked(p, z);
        const std::uint32_t slot = slots.slot_for(bin, next);
        if (slot == agg.bin_id.size()) {
            agg.bin_id.push_back(bin);
            agg.count.push_back(0);
            agg.sum_diff.resize(agg.sum_diff.size() + K, 0.0);
            agg.sum_sq.push_back(0.0);
            comp_diff.resize(comp_diff.size() + K, 0.0);
            comp_sq.push_back(0.0);
        }
        ++agg.count[slot];

        double* S = agg.sum_diff.data() + static_cast<std::size_t>(slot) * K;
        double* C = comp_diff.data() + static_cast<std::size_t>(slot) * K;
        const std::uint32_t label = s.y[i];
        double qpoint = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            const double d = (k == label ? 1.0 : 0.0) - z[k];
            qpoint += d * d;
            // inline Kahan step on (S[k], C[k])
            double yv = d - C[k];
            double t = S[k] + yv;
            C[k] = (t - S[k]) - yv;
            S[k] = t;
        }
        double yv = qpoint - comp_sq[slot];
        double t = agg.sum_sq[slot] + yv;
        comp_sq[slot] = (t - agg.sum_sq[slot]) - yv;
        agg.sum_sq[slot] = t;
    }
    return agg;
}

PluginStats plugin_stats(const BinnedAggregates& agg) {
    const std::uint32_t K = agg.K;
    const double n = static_cast<double>(agg.n);
    KahanSum tb, td, tl1;
    for (std::size_t i = 0; i < agg.num_bins(); ++i) {
        const double* S = agg.sum_diff.data() + i * K;
        double normsq = 0.0, norm1 = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            normsq += S[k] * S[k];
            norm1 += std::abs(S[k]);
        }
        const double Ni = static_cast<double>(agg.count[i]);
        tb.add(normsq / (n * Ni));
        td.add((normsq - agg.sum_sq[i]) / (n * Ni));
        tl1.add(norm1 / n);
    }
    return {tb.value(), td.value(), tl1.value()};
}

PluginStats plugin_stats(const CalibrationSample& s, const Partition& p) {
    return plugin_stats(aggregate(s, p));
}

double biased_plugin(const CalibrationSample& s, const Partition& p) {
    return plugin_stats(s, p).biased;
}
double debiased_plugin(const CalibrationSample& s, const Partition& p) {
    return plugin_stats(s, p).debiased;
}
double l1_plugin(const CalibrationSample& s, const Partition& p) {
    return plugin_stats(s, p).l1;
}

double empirical_ece_guo(const BinarySample& b, std::uint32_t num_bins) {
    if (b.n() == 0) throw DataError("empirical_ece_guo: empty sample");
    if (num_bins == 0) throw InvalidArgumentError("empirical_ece_guo: num_bins must be positive");
    const std::size_t n = b.n();
    std::vector<double> zsum(num_bins, 0.0), ysum(num_bins, 0.0);
    std::vector<std::uint64_t> cnt(num_bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = b.z[i];
        if (!(z >= 0.0 && z <= 1.0))
            throw DataError("empirical_ece_guo: z outside [0,1]");
        auto idx = static_cast<std::uint32_t>(z * num_bins);
        if (idx >= num_bins) idx = num_bins - 1;
        zsum[idx] += z;
        ysum[idx] += b.y[i];
        ++cnt[idx];
    }
    KahanSum total;
    for (std::uint32_t i = 0; i < num_bins; ++i) {
        if (cnt[i] == 0) continue;
        const double Ni = static_cast<double>(cnt[i]);
        total.add((Ni / static_cast<double>(n)) * std::abs(ysum[i] / Ni - zsum[i] / Ni));
    }
    return total.value();
}

double debiased_discrete_l2ece(const std::vector<DiscreteGroup>& groups) {
    if (groups.empty()) throw DataError("debiased_discrete_l2ece: no groups");
    std::uint64_t n = 0;
    for (const auto& g : groups) {
        if (g.N < 2)
            throw InvalidArgumentError("debiased_discrete_l2ece: group too small (N < 2)");
        if (g.M > g.N)
            throw InvalidArgumentError("debiased_discrete_l2ece: positives exceed group size");
        n += g.N;
    }
    KahanSum total;
    for (const auto& g : groups) {
        const double N = static_cast<double>(g.N);
        const double phat = static_cast<double>(g.M) / N;
        const double r = phat - g.v;
        const double term = r * r - phat * (1.0 - phat) / (N - 1.0);
        total.add((N / static_cast<double>(n)) * term);
    }
    return total.value();
}

// ---------------------------------------------------------------------------

BinnedDesign::BinnedDesign(const CalibrationSample& s, const Partition& p) : s_(&s), K_(p.K) {
    if (s.n == 0) throw DataError("BinnedDesign: empty sample");
    if (s.K != p.K)
        throw InvalidArgumentError("BinnedDesign: sample and partition disagree on K");

    slot_.resize(s.n);
    SlotMap slots(p.cell_count, s.n);
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::uint32_t slot = slots.slot_for(assign_bin_unchecked(p, s.row(i)), next);
        slot_[i] = slot;
        if (slot == base_count_.size()) {
            base_count_.push_back(0);
            base_sum_z_.resize(base_sum_z_.size() + K_, 0.0);
        }
        ++base_count_[slot];
        double* sz = base_sum_z_.data() + static_cast<std::size_t>(slot) * K_;
        const double* z = s.row(i);
        for (std::uint32_t k = 0; k < K_; ++k) sz[k] += z[k];
    }
    nslots_ = next;

    point_zsq_.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double* z = s.row(i);
        double q = 0.0;
        for (std::uint32_t k = 0; k < K_; ++k) q += z[k] * z[k];
        point_zsq_[i] = q;
    }

    acc_.assign(static_cast<std::size_t>(nslots_) * K_, 0.0);
    q_.assign(nslots_, 0.0);
    sz_.assign(static_cast<std::size_t>(nslots_) * K_, 0.0);
    cnt_.assign(nslots_, 0);
    touched_.reserve(nslots_);
}

PluginStats BinnedDesign::stats_with_labels(const std::uint32_t* labels) const {
    const std::size_t n = s_->n;
    const std::uint32_t K = K_;

    // acc_ and q_ are all-zero between calls; every slot is hit (same Z as
    // the design), so the reduction below restores that invariant in full.
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t sl = slot_[i];
        const std::uint32_t lab = labels[i];
        acc_[static_cast<std::size_t>(sl) * K + lab] += 1.0;
        q_[sl] += 1.0 - 2.0 * s_->row(i)[lab] + point_zsq_[i];
    }

    KahanSum tb, td, tl1;
    const double dn = static_cast<double>(n);
    for (std::uint32_t sl = 0; sl < nslots_; ++sl) {
        double* a = acc_.data() + static_cast<std::size_t>(sl) * K;
        const double* sz = base_sum_z_.data() + static_cast<std::size_t>(sl) * K;
        double normsq = 0.0, norm1 = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            const double Sk = a[k] - sz[k];
            normsq += Sk * Sk;
            norm1 += std::abs(Sk);
            a[k] = 0.0; // restore the all-zero invariant as we finish the slot
        }
        const double Ni = static_cast<double>(base_count_[sl]);
        tb.add(normsq / (dn * Ni));
        td.add((normsq - q_[sl]) / (dn * Ni));
        tl1.add(norm1 / dn);
        q_[sl] = 0.0;
    }
    return {tb.value(), td.value(), tl1.value()};
}

PluginStats BinnedDesign::stats_resampled(const std::uint32_t* idx, const std::uint32_t* labels,
                                          std::size_t count) const {
    if (count == 0) throw DataError("stats_resampled: empty resample");
    const std::uint32_t K = K_;

    touched_.clear();
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t j = idx[i];
        const std::uint32_t sl = slot_[j];
        if (cnt_[sl] == 0) touched_.push_back(sl);
        ++cnt_[sl];
        const double* z = s_->row(j);
        double* a = acc_.data() + static_cast<std::size_t>(sl) * K;
        double* sz = sz_.data() + static_cast<std::size_t>(sl) * K;
        const std::uint32_t lab = labels[i];
        a[lab] += 1.0;
        for (std::uint32_t k = 0; k < K; ++k) sz[k] += z[k];
        q_[sl] += 1.0 - 2.0 * z[lab] + point_zsq_[j];
    }

    KahanSum tb, td, tl1;
    const double dn = static_cast<double>(count);
    for (const std::uint32_t sl : touched_) {
        double* a = acc_.data() + static_cast<std::size_t>(sl) * K;
        double* sz = sz_.data() + static_cast<std::size_t>(sl) * K;
        double normsq = 0.0, norm1 = 0.0;
        for (std::uint32_t k = 0; k < K; ++k) {
            const double Sk = a[k] - sz[k];
            normsq += Sk * Sk;
            norm1 += std::abs(Sk);
            a[k] = 0.0; // restore the all-zero invariant as we finish the slot
            sz[k] = 0.0;
        }
        const double Ni = static_cast<double>(cnt_[sl]);
        tb.add(normsq / (dn * Ni));
        td.add((normsq - q_[sl]) / (dn * Ni));
        tl1.add(norm1 / dn);
        q_[sl] = 0.0;
        cnt_[sl] = 0;
    }
    return {tb.value(), td.value(), tl1.value()};
}

} // namespace tcal
