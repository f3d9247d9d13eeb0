#include "tcal/tests.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>

namespace tcal {

std::uint32_t optimal_bins(std::size_t n, double s, std::uint32_t K) {
    if (n < 1) throw InvalidArgumentError("optimal_bins: n must be >= 1");
    if (!(s > 0.0)) throw InvalidArgumentError("optimal_bins: s must be positive");
    if (K < 2) throw InvalidArgumentError("optimal_bins: K must be >= 2");
    const double expnt = 2.0 / (4.0 * s + static_cast<double>(K) - 1.0);
    const double v = std::pow(static_cast<double>(n), expnt);
    auto m = static_cast<std::uint64_t>(std::floor(v + 1e-9));
    if (m < 1) m = 1;
    if (m > 0xFFFFFFFFull) throw InvalidArgumentError("optimal_bins: m overflows");
    return static_cast<std::uint32_t>(m);
}

static void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgumentError("alpha must be in (0,1)");
}

double tcal_analytic_threshold(std::uint32_t K, double alpha, std::uint32_t m,
                               std::size_t n) {
    check_alpha(alpha);
    if (m < 1 || K < 2 || n < 1)
        throw InvalidArgumentError("tcal_analytic_threshold: invalid arguments");
    const double half = 0.5 * static_cast<double>(K - 1);
    const double lo = std::pow(static_cast<double>(m), half) / static_cast<double>(n);
    const double hi = std::pow(static_cast<double>(m), -half);
    return (std::sqrt(2.0) * static_cast<double>(K) / std::sqrt(alpha)) * std::min(lo, hi);
}

double tcal_composite_threshold(std::uint32_t K, double alpha, std::uint32_t m,
                                std::size_t n, double c0, double s) {
    check_alpha(alpha);
    if (c0 < 0.0) throw InvalidArgumentError("tcal_composite_threshold: c0 must be >= 0");
    if (!(s > 0.0)) throw InvalidArgumentError("tcal_composite_threshold: s must be positive");
    const double d = static_cast<double>(K - 1);
    const double dn = static_cast<double>(n);
    const double mk = std::pow(static_cast<double>(m), d);
    const double base = std::min(mk / (dn * dn), 1.0 / mk);
    const double rate = std::pow(dn, -4.0 * s / (4.0 * s + d));
    const double extra = 5.0 * c0 * c0 * rate * std::min(1.0 / dn, 1.0 / mk);
    return (static_cast<double>(K) / std::sqrt(alpha)) * std::sqrt(2.0 * base + extra);
}

std::uint32_t adaptive_num_scales(std::size_t n, std::uint32_t K) {
    if (n < 3) throw InvalidArgumentError("adaptive_num_scales: n must be >= 3");
    if (K < 2) throw InvalidArgumentError("adaptive_num_scales: K must be >= 2");
    const double dn = static_cast<double>(n);
    const double x = (2.0 / static_cast<double>(K - 1)) *
                     std::log2(dn / std::sqrt(std::log(dn)));
    auto B = static_cast<std::int64_t>(std::ceil(x - 1e-9));
    if (B < 1) B = 1;
    return static_cast<std::uint32_t>(B);
}

std::vector<std::uint32_t> adaptive_grid(std::size_t n, std::uint32_t K) {
    const std::uint32_t B = adaptive_num_scales(n, K);
    if (B >= 32) throw InvalidArgumentError("adaptive_grid: scale grid too large");
    std::vector<std::uint32_t> grid(B);
    for (std::uint32_t b = 0; b < B; ++b) grid[b] = 1u << (b + 1);
    return grid;
}

const char* cv_source_name(CvSource s) {
    switch (s) {
        case CvSource::Analytic: return "analytic";
        case CvSource::OracleMC: return "oracle";
        case CvSource::Consistency: return "consistency";
        case CvSource::YOnly: return "yonly";
    }
    return "?";
}

namespace {

// Observed statistics plus replicate matrix under one critical-value spec.
// Statistics for the observed sample use the same evaluation path as the
// replicates wherever exchangeability matters (yonly), so the comparison is
// between values of literally the same function.
struct CvMachine {
    std::vector<double> replicate_matrix; // N x requests
    std::size_t stride = 0;
    int N = 0;

    void run(const CalibrationSample& s, const std::vector<ScaleStat>& reqs,
             const CriticalValueSpec& spec) {
        N = spec.num_resamples;
        stride = reqs.size();
        switch (spec.source) {
            case CvSource::OracleMC:
                if (spec.oracle_model == nullptr)
                    throw InvalidArgumentError(
                        "critical values: oracle source needs a null model");
                replicate_matrix =
                    oracle_replicates(*spec.oracle_model, s.n, reqs, N, spec.seed);
                break;
            case CvSource::Consistency:
                replicate_matrix = consistency_replicates(s, reqs, N, spec.seed);
                break;
            case CvSource::YOnly:
                replicate_matrix = yonly_replicates(s, reqs, N, spec.seed);
                break;
            case CvSource::Analytic:
                throw InvalidArgumentError("CvMachine: analytic source has no replicates");
        }
    }

    OrderStatResult threshold(std::size_t j, double level) const {
        std::vector<double> col(static_cast<std::size_t>(N));
        for (int r = 0; r < N; ++r)
            col[static_cast<std::size_t>(r)] = replicate_matrix[static_cast<std::size_t>(r) * stride + j];
        return order_stat_threshold(col, level);
    }
};

} // namespace

TestReport tcal_fixed(const CalibrationSample& s, std::uint32_t m, double alpha,
                      const CriticalValueSpec& cv) {
    check_alpha(alpha);
    if (s.n < 1) throw DataError("tcal_fixed: empty sample");
    const Partition part = build_partition(m, s.K);

    TestReport rep;
    rep.method = "tcal-fixed";
    rep.alpha = alpha;
    rep.bins = {m};
    rep.n = s.n;
    rep.K = s.K;
    rep.seed = cv.seed;
    rep.source = cv_source_name(cv.source);

    if (cv.source == CvSource::Analytic) {
        rep.statistic = debiased_plugin(s, part);
        rep.critical_value = tcal_analytic_threshold(s.K, alpha, m, s.n);
    } else if (cv.source == CvSource::OracleMC) {
        rep.statistic = debiased_plugin(s, part);
        CvMachine mach;
        mach.run(s, {{m, StatKind::Debiased}}, cv);
        auto th = mach.threshold(0, alpha);
        rep.critical_value = th.threshold;
        rep.achieved_level = th.achieved_level;
        if (!th.feasible)
            rep.warnings.push_back("resample count too small for alpha; test cannot reject");
    } else {
        BinnedDesign design(s, part);
        rep.statistic = design.stats_with_labels(s.y.data()).debiased;
        CvMachine mach;
        mach.run(s, {{m, StatKind::Debiased}}, cv);
        auto th = mach.threshold(0, alpha);
        rep.critical_value = th.threshold;
        rep.achieved_level = th.achieved_level;
        if (!th.feasible)
            rep.warnings.push_back("resample count too small for alpha; test cannot reject");
    }
    rep.reject = rep.statistic >= rep.critical_value;
    return rep;
}

TestReport tcal_adaptive(const CalibrationSample& s, double alpha,
                         const CriticalValueSpec& cv) {
    check_alpha(alpha);
    const std::vector<std::uint32_t> grid = adaptive_grid(s.n, s.K);
    const std::uint32_t B = static_cast<std::uint32_t>(grid.size());
    const double level = alpha / static_cast<double>(B);

    TestReport rep;
    rep.method = "tcal-adaptive";
    rep.alpha = alpha;
    rep.bins = grid;
    rep.n = s.n;
    rep.K = s.K;
    rep.seed = cv.seed;
    rep.source = cv_source_name(cv.source);

    std::vector<ScaleStat> reqs;
    reqs.reserve(B);
    for (std::uint32_t m : grid) reqs.push_back({m, StatKind::Debiased});

    // observed statistics per scale
    std::vector<double> observed(B);
    if (cv.source == CvSource::Analytic || cv.source == CvSource::OracleMC) {
        for (std::uint32_t b = 0; b < B; ++b)
            observed[b] = debiased_plugin(s, build_partition(grid[b], s.K));
    } else {
        for (std::uint32_t b = 0; b < B; ++b) {
            BinnedDesign design(s, build_partition(grid[b], s.K));
            observed[b] = design.stats_with_labels(s.y.data()).debiased;
        }
    }

    CriticalValueSpec spec = cv;
    if (cv.source != CvSource::Analytic) {
        // smallest N with floor(level (N+1)) >= 1
        const int needed = static_cast<int>(std::ceil(1.0 / level - 1e-9)) - 1;
        if (spec.num_resamples < needed) {
            spec.num_resamples = needed;
            rep.warnings.push_back(
                "resample count raised to " + std::to_string(needed) +
                " so that level alpha/B is attainable");
        }
    }

    CvMachine mach;
    if (spec.source != CvSource::Analytic) mach.run(s, reqs, spec);

    rep.scales.resize(B);
    for (std::uint32_t b = 0; b < B; ++b) {
        auto& sc = rep.scales[b];
        sc.m = grid[b];
        sc.statistic = observed[b];
        if (spec.source == CvSource::Analytic) {
            sc.critical_value = tcal_analytic_threshold(s.K, level, grid[b], s.n);
        } else {
            auto th = mach.threshold(b, level);
            sc.critical_value = th.threshold;
            rep.achieved_level = th.achieved_level;
        }
        sc.reject = sc.statistic >= sc.critical_value;
        if (sc.reject && rep.first_reject_scale == 0)
            rep.first_reject_scale = static_cast<int>(b + 1);
    }
    rep.reject = rep.first_reject_scale != 0;
    if (rep.first_reject_scale != 0) {
        rep.statistic = rep.scales[rep.first_reject_scale - 1].statistic;
        rep.critical_value = rep.scales[rep.first_reject_scale - 1].critical_value;
    } else {
        rep.statistic = rep.scales.empty() ? 0.0 : rep.scales[0].statistic;
        rep.critical_value = rep.scales.empty() ? 0.0 : rep.scales[0].critical_value;
    }
    return rep;
}

TestReport tcal_composite(const CalibrationSample& s, std::uint32_t m, double alpha,
                          double c0, double smoothness) {
    check_alpha(alpha);
    if (s.n < 1) throw DataError("tcal_composite: empty sample");
    const Partition part = build_partition(m, s.K);

    TestReport rep;
    rep.method = "tcal-composite";
    rep.alpha = alpha;
    rep.bins = {m};
    rep.n = s.n;
    rep.K = s.K;
    rep.source = "analytic";
    rep.smoothness = smoothness;
    rep.statistic = debiased_plugin(s, part);
    rep.critical_value = tcal_composite_threshold(s.K, alpha, m, s.n, c0, smoothness);
    rep.reject = rep.statistic >= rep.critical_value;
    return rep;
}

double binomial_two_sided_p(double v, std::uint64_t N, std::uint64_t M) {
    if (!(v >= 0.0 && v <= 1.0))
        throw DataError("binomial_two_sided_p: success probability outside [0,1]");
    if (M > N) throw InvalidArgumentError("binomial_two_sided_p: M > N");
    boost::math::binomial_distribution<double> dist(static_cast<double>(N), v);
    const double p_obs = boost::math::pdf(dist, static_cast<double>(M));
    // minimum-likelihood two-sided p: total mass of outcomes no more likely
    // than the observed one
    const double cutoff = p_obs * (1.0 + 1e-12);
    double p = 0.0;
    for (std::uint64_t j = 0; j <= N; ++j) {
        const double pj = boost::math::pdf(dist, static_cast<double>(j));
        if (pj <= cutoff) p += pj;
    }
    return std::min(p, 1.0);
}

TestReport discrete_binomial_test(const std::vector<DiscreteGroup>& groups, double alpha) {
    check_alpha(alpha);
    if (groups.empty()) throw DataError("discrete_binomial_test: no groups");
    const auto t = static_cast<double>(groups.size());

    TestReport rep;
    rep.method = "binomial";
    rep.alpha = alpha;
    rep.K = 2;
    rep.source = "exact";
    double min_p = 1.0;
    for (const auto& g : groups) {
        if (g.N < 1) throw InvalidArgumentError("discrete_binomial_test: empty group");
        rep.n += g.N;
        min_p = std::min(min_p, binomial_two_sided_p(g.v, g.N, g.M));
    }
    rep.statistic = min_p;           // rejects when min p-value <= alpha/t
    rep.critical_value = alpha / t;
    rep.reject = min_p <= rep.critical_value;
    return rep;
}

namespace {

struct ScoreParts {
    double u0 = 0.0, u1 = 0.0;
    double i00 = 0.0, i01 = 0.0, i11 = 0.0;
};

// statistic = U^T I^{-1} U; returns +inf for a singular I with U != 0,
// 0 for a singular I with U == 0 (degenerate but consistent with the null).
double score_statistic(const ScoreParts& p, bool* singular) {
    const double det = p.i00 * p.i11 - p.i01 * p.i01;
    const double scale = std::max({std::abs(p.i00 * p.i11), p.i01 * p.i01, 1e-300});
    if (det <= 1e-12 * scale) {
        if (singular) *singular = true;
        if (p.u0 == 0.0 && p.u1 == 0.0) return 0.0;
        return std::numeric_limits<double>::infinity();
    }
    if (singular) *singular = false;
    return (p.u0 * p.u0 * p.i11 - 2.0 * p.u0 * p.u1 * p.i01 + p.u1 * p.u1 * p.i00) / det;
}

} // namespace

TestReport logistic_score_test(const BinarySample& b, double alpha, int mc_reps, Rng& rng) {
    check_alpha(alpha);
    const std::size_t n = b.n();
    if (n == 0) throw DataError("logistic_score_test: empty sample");
    if (mc_reps < 1) throw InvalidArgumentError("logistic_score_test: mc_reps must be >= 1");

    std::vector<double> ell(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = b.z[i];
        if (!(z > 0.0 && z < 1.0))
            throw DataError("logistic_score_test: z must lie strictly in (0,1)");
        ell[i] = std::log(z / (1.0 - z));
    }

    auto parts_for = [&](const std::uint8_t* y, const double* z,
                         const std::size_t* idx) {
        ScoreParts p;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = idx ? idx[i] : i;
            const double zi = z[j];
            const double li = ell[j];
            const double d = static_cast<double>(y[i]) - zi;
            p.u0 += d;
            p.u1 += d * li;
            const double w = zi * (1.0 - zi);
            p.i00 += w;
            p.i01 += w * li;
            p.i11 += w * li * li;
        }
        return p;
    };

    bool singular = false;
    const ScoreParts obs = parts_for(b.y.data(), b.z.data(), nullptr);
    const double stat = score_statistic(obs, &singular);

    TestReport rep;
    rep.method = "score";
    rep.alpha = alpha;
    rep.n = n;
    rep.K = 2;
    rep.source = "mc";
    if (singular) {
        if (std::isinf(stat))
            throw DegenerateDesignError(
                "logistic_score_test: singular information matrix");
        rep.warnings.push_back("singular information matrix with zero score; statistic 0");
    }
    rep.statistic = stat;

    const std::uint64_t master = rng();
    rep.seed = master;
    std::vector<double> reps(static_cast<std::size_t>(mc_reps));
    std::size_t degenerate_reps = 0;
    {
        std::vector<std::uint8_t> ytil(n);
        std::vector<std::size_t> idx(n);
        for (int r = 0; r < mc_reps; ++r) {
            Rng rr = make_rng(master, static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < n; ++i) {
                idx[i] = static_cast<std::size_t>(uniform_below(rr, n));
                ytil[i] = (uniform01(rr) < b.z[idx[i]]) ? 1 : 0;
            }
            bool sing = false;
            const double v = score_statistic(parts_for(ytil.data(), b.z.data(), idx.data()),
                                             &sing);
            if (sing && std::isinf(v)) ++degenerate_reps;
            reps[static_cast<std::size_t>(r)] = v;
        }
    }
    if (degenerate_reps > 0)
        rep.warnings.push_back(std::to_string(degenerate_reps) +
                               " Monte-Carlo replicates had singular information");
    auto th = order_stat_threshold(reps, alpha);
    rep.critical_value = th.threshold;
    rep.achieved_level = th.achieved_level;
    if (!th.feasible)
        rep.warnings.push_back("resample count too small for alpha; test cannot reject");
    rep.reject = rep.statistic >= rep.critical_value;
    return rep;
}

BinarySample binarize_top1(const CalibrationSample& s) {
    if (s.K < 2) throw InvalidArgumentError("binarize_top1: K must be >= 2");
    BinarySample out;
    out.z.resize(s.n);
    out.y.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double* z = s.row(i);
        std::uint32_t arg = 0;
        for (std::uint32_t k = 1; k < s.K; ++k)
            if (z[k] > z[arg]) arg = k; // strict: ties keep the lowest index
        out.z[i] = z[arg];
        out.y[i] = (s.y[i] == arg) ? 1 : 0;
    }
    return out;
}

} // namespace tcal
