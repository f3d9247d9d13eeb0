#include "tcal/resampling.hpp"

#include <algorithm>
#include <cmath>

namespace tcal {

namespace {

struct RequestPlan {
    std::vector<Partition> partitions;        // unique, in first-appearance order
    std::vector<std::size_t> req_partition;   // per request
    std::vector<StatKind> req_kind;
};

RequestPlan plan_requests(const std::vector<ScaleStat>& requests, std::uint32_t K) {
    if (requests.empty())
        throw InvalidArgumentError("resampling: at least one statistic request needed");
    RequestPlan plan;
    for (const auto& r : requests) {
        std::size_t pi = plan.partitions.size();
        for (std::size_t i = 0; i < plan.partitions.size(); ++i) {
            if (plan.partitions[i].m == r.m) {
                pi = i;
                break;
            }
        }
        if (pi == plan.partitions.size()) plan.partitions.push_back(build_partition(r.m, K));
        plan.req_partition.push_back(pi);
        plan.req_kind.push_back(r.kind);
    }
    return plan;
}

double pick(const PluginStats& st, StatKind kind) {
    switch (kind) {
        case StatKind::Biased: return st.biased;
        case StatKind::Debiased: return st.debiased;
        case StatKind::L1: return st.l1;
    }
    return st.debiased;
}

// Draw a label from Categorical(z).
std::uint32_t draw_label(Rng& rng, const double* z, std::uint32_t K) {
    const double u = uniform01(rng);
    double cum = 0.0;
    for (std::uint32_t k = 0; k + 1 < K; ++k) {
        cum += z[k];
        if (u < cum) return k;
    }
    return K - 1;
}

// Replicates [0, N) split into contiguous chunks, one task per chunk; each
// replicate r draws from make_rng(master_seed, r), so the output is the same
// for any thread count.
template <typename PerChunk>
void run_chunked(int N, const PerChunk& per_chunk) {
    const int T = std::max(1, std::min<int>(max_threads(), N));
    parallel_for(static_cast<std::size_t>(T), [&](std::size_t c) {
        const int lo = static_cast<int>((static_cast<long long>(N) * c) / T);
        const int hi = static_cast<int>((static_cast<long long>(N) * (c + 1)) / T);
        per_chunk(lo, hi);
    });
}

} // namespace

std::vector<double> oracle_replicates(const SyntheticModel& null_model, std::size_t n,
                                      const std::vector<ScaleStat>& requests, int N,
                                      std::uint64_t master_seed) {
    if (N < 1) throw InvalidArgumentError("oracle_replicates: N must be >= 1");
    if (n < 1) throw InvalidArgumentError("oracle_replicates: n must be >= 1");
    RequestPlan plan = plan_requests(requests, null_model.K);
    const std::size_t R = requests.size();
    std::vector<double> out(static_cast<std::size_t>(N) * R);

    run_chunked(N, [&](int lo, int hi) {
        CalibrationSample buf;
        std::vector<PluginStats> per_part(plan.partitions.size());
        for (int r = lo; r < hi; ++r) {
            Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(r));
            sample(null_model, n, rng, buf);
            for (std::size_t p = 0; p < plan.partitions.size(); ++p)
                per_part[p] = plugin_stats(buf, plan.partitions[p]);
            for (std::size_t j = 0; j < R; ++j)
                out[static_cast<std::size_t>(r) * R + j] =
                    pick(per_part[plan.req_partition[j]], plan.req_kind[j]);
        }
    });
    return out;
}

std::vector<double> consistency_replicates(const CalibrationSample& s,
                                           const std::vector<ScaleStat>& requests, int N,
                                           std::uint64_t master_seed) {
    if (N < 1) throw InvalidArgumentError("consistency_replicates: N must be >= 1");
    if (s.n == 0) throw DataError("consistency_replicates: empty sample");
    RequestPlan plan = plan_requests(requests, s.K);
    const std::size_t R = requests.size();
    std::vector<double> out(static_cast<std::size_t>(N) * R);

    std::vector<BinnedDesign> master_designs;
    master_designs.reserve(plan.partitions.size());
    for (const auto& p : plan.partitions) master_designs.emplace_back(s, p);

    run_chunked(N, [&](int lo, int hi) {
        std::vector<BinnedDesign> designs = master_designs; // private scratch
        std::vector<std::uint32_t> idx(s.n), labels(s.n);
        std::vector<PluginStats> per_part(plan.partitions.size());
        for (int r = lo; r < hi; ++r) {
            Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < s.n; ++i) {
                idx[i] = static_cast<std::uint32_t>(uniform_below(rng, s.n));
                labels[i] = draw_label(rng, s.row(idx[i]), s.K);
            }
            for (std::size_t p = 0; p < designs.size(); ++p)
                per_part[p] = designs[p].stats_resampled(idx.data(), labels.data(), s.n);
            for (std::size_t j = 0; j < R; ++j)
                out[static_cast<std::size_t>(r) * R + j] =
                    pick(per_part[plan.req_partition[j]], plan.req_kind[j]);
        }
    });
    return out;
}

std::vector<double> yonly_replicates(const CalibrationSample& s,
                                     const std::vector<ScaleStat>& requests, int N,
                                     std::uint64_t master_seed) {
    if (N < 1) throw InvalidArgumentError("yonly_replicates: N must be >= 1");
    if (s.n == 0) throw DataError("yonly_replicates: empty sample");
    RequestPlan plan = plan_requests(requests, s.K);
    const std::size_t R = requests.size();
    std::vector<double> out(static_cast<std::size_t>(N) * R);

    std::vector<BinnedDesign> master_designs;
    master_designs.reserve(plan.partitions.size());
    for (const auto& p : plan.partitions) master_designs.emplace_back(s, p);

    run_chunked(N, [&](int lo, int hi) {
        std::vector<BinnedDesign> designs = master_designs;
        std::vector<std::uint32_t> labels(s.n);
        std::vector<PluginStats> per_part(plan.partitions.size());
        for (int r = lo; r < hi; ++r) {
            Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < s.n; ++i)
                labels[i] = draw_label(rng, s.row(i), s.K);
            for (std::size_t p = 0; p < designs.size(); ++p)
                per_part[p] = designs[p].stats_with_labels(labels.data());
            for (std::size_t j = 0; j < R; ++j)
                out[static_cast<std::size_t>(r) * R + j] =
                    pick(per_part[plan.req_partition[j]], plan.req_kind[j]);
        }
    });
    return out;
}

OrderStatResult order_stat_threshold(std::vector<double>& values, double alpha) {
    if (values.empty()) throw InvalidArgumentError("order_stat_threshold: no values");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgumentError("order_stat_threshold: alpha must be in (0,1)");
    const std::size_t N = values.size();
    const double x = (1.0 - alpha) * static_cast<double>(N + 1);
    auto k = static_cast<std::size_t>(std::ceil(x - 1e-9));
    if (k < 1) k = 1;

    OrderStatResult res;
    if (k > N) {
        res.threshold = std::numeric_limits<double>::infinity();
        res.feasible = false;
        res.achieved_level = 0.0;
        return res;
    }
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
    res.threshold = values[k - 1];
    res.feasible = true;
    res.achieved_level =
        (static_cast<double>(N + 1 - k)) / static_cast<double>(N + 1);
    return res;
}

namespace {

double single_stat_critical(std::vector<double> column, double alpha) {
    return order_stat_threshold(column, alpha).threshold;
}

std::vector<double> column(const std::vector<double>& matrix, std::size_t stride,
                           std::size_t j) {
    std::vector<double> col(matrix.size() / stride);
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = matrix[r * stride + j];
    return col;
}

} // namespace

double oracle_mc_critical(const SyntheticModel& null_model, StatKind stat, std::uint32_t m,
                          std::size_t n, double alpha, int N, Rng& rng) {
    std::vector<ScaleStat> reqs{{m, stat}};
    auto vals = oracle_replicates(null_model, n, reqs, N, rng());
    return single_stat_critical(column(vals, 1, 0), alpha);
}

double consistency_resample_critical(const CalibrationSample& s, StatKind stat,
                                     std::uint32_t m, double alpha, int N, Rng& rng) {
    std::vector<ScaleStat> reqs{{m, stat}};
    auto vals = consistency_replicates(s, reqs, N, rng());
    return single_stat_critical(column(vals, 1, 0), alpha);
}

double y_only_critical(const CalibrationSample& s, StatKind stat, std::uint32_t m,
                       double alpha, int N, Rng& rng) {
    std::vector<ScaleStat> reqs{{m, stat}};
    auto vals = yonly_replicates(s, reqs, N, rng());
    return single_stat_critical(column(vals, 1, 0), alpha);
}

} // namespace tcal
