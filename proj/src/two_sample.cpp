#include "tcal/two_sample.hpp"

#include "tcal/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tcal {

namespace {

constexpr double kCoordTol = 1e-9;

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgumentError("alpha must be in (0,1)");
}

void validate_input(const TwoSampleInput& in, std::size_t min1, std::size_t min2) {
    if (in.d < 1) throw InvalidArgumentError("two-sample: dimension must be >= 1");
    if (in.V.size() % in.d != 0 || in.W.size() % in.d != 0)
        throw InvalidArgumentError("two-sample: point array length not a multiple of d");
    if (in.n1() < min1 || in.n2() < min2)
        throw InvalidArgumentError("two-sample: sample too small");
}

} // namespace

std::uint64_t cube_cell_count(std::uint32_t m, std::size_t d) {
    if (m < 1) throw InvalidArgumentError("cube grid: m must be >= 1");
    if (d < 1) throw InvalidArgumentError("cube grid: d must be >= 1");
    std::uint64_t r = 1;
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t j = 0; j < d; ++j) {
        if (r > lim / m) throw InvalidArgumentError("cube grid: m^d overflows");
        r *= m;
    }
    return r;
}

std::uint64_t cube_cell_index(const double* x, std::size_t d, std::uint32_t m) {
    std::uint64_t idx = 0;
    std::uint64_t stride = 1;
    for (std::size_t j = 0; j < d; ++j) {
        const double xj = x[j];
        if (!(xj >= -kCoordTol && xj <= 1.0 + kCoordTol))
            throw DataError("two-sample: point coordinate outside [0,1]");
        const double c = std::min(std::max(xj, 0.0), 1.0);
        auto u = static_cast<std::uint64_t>(c * static_cast<double>(m));
        if (u >= m) u = m - 1; // the closed upper face folds into the last cell
        idx += u * stride;
        stride *= m;
    }
    return idx;
}

namespace {

// Maps raw cell ids of the pooled sample to dense ids [0, #occupied).
std::size_t dense_remap(const std::vector<std::uint64_t>& raw,
                        std::vector<std::uint32_t>& slot) {
    std::vector<std::uint64_t> uniq(raw);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    slot.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        slot[i] = static_cast<std::uint32_t>(
            std::lower_bound(uniq.begin(), uniq.end(), raw[i]) - uniq.begin());
    return uniq.size();
}

double eval_counts(bool chi2, const std::uint32_t* a, const std::uint32_t* b,
                   const std::uint32_t* touched, std::size_t ntouched,
                   double n1, double n2) {
    KahanSum acc;
    if (chi2) {
        for (std::size_t t = 0; t < ntouched; ++t) {
            const std::uint32_t c = touched[t];
            const double dv = n2 * static_cast<double>(a[c]) -
                              n1 * static_cast<double>(b[c]);
            acc.add(dv * dv);
        }
    } else {
        const double d1 = n1 * (n1 - 1.0);
        const double d2 = n2 * (n2 - 1.0);
        const double dx = n1 * n2;
        for (std::size_t t = 0; t < ntouched; ++t) {
            const std::uint32_t c = touched[t];
            const double av = static_cast<double>(a[c]);
            const double bv = static_cast<double>(b[c]);
            acc.add(av * (av - 1.0) / d1 + bv * (bv - 1.0) / d2 -
                    2.0 * av * bv / dx);
        }
    }
    return acc.value();
}

// Pooled-sample design shared by the observed statistic and all permutations:
// per scale, the dense cell id of every pooled point (V first, then W).
struct PermEngine {
    std::size_t n1 = 0, n2 = 0, n = 0;
    bool chi2 = false;
    std::vector<std::vector<std::uint32_t>> slot;
    std::vector<std::size_t> nslots;
    std::size_t max_slots = 0;

    PermEngine(const TwoSampleInput& in, const std::vector<std::uint32_t>& scales,
               bool use_chi2)
        : n1(in.n1()), n2(in.n2()), n(n1 + n2), chi2(use_chi2),
          slot(scales.size()), nslots(scales.size()) {
        std::vector<std::uint64_t> raw(n);
        for (std::size_t si = 0; si < scales.size(); ++si) {
            const std::uint32_t m = scales[si];
            cube_cell_count(m, in.d); // overflow guard
            for (std::size_t i = 0; i < n1; ++i)
                raw[i] = cube_cell_index(&in.V[i * in.d], in.d, m);
            for (std::size_t j = 0; j < n2; ++j)
                raw[n1 + j] = cube_cell_index(&in.W[j * in.d], in.d, m);
            nslots[si] = dense_remap(raw, slot[si]);
            max_slots = std::max(max_slots, nslots[si]);
        }
    }

    struct Scratch {
        std::vector<std::uint32_t> a, b, touched;
        explicit Scratch(const PermEngine& e)
            : a(e.max_slots, 0), b(e.max_slots, 0) {
            touched.reserve(e.n);
        }
    };

    // order[pos] = pooled point at position pos; the first n1 positions form V.
    double eval(std::size_t si, const std::uint32_t* order, Scratch& sc) const {
        const auto& sl = slot[si];
        sc.touched.clear();
        for (std::size_t pos = 0; pos < n; ++pos) {
            const std::uint32_t c = sl[order[pos]];
            if (sc.a[c] == 0 && sc.b[c] == 0) sc.touched.push_back(c);
            if (pos < n1) ++sc.a[c]; else ++sc.b[c];
        }
        const double v = eval_counts(chi2, sc.a.data(), sc.b.data(),
                                     sc.touched.data(), sc.touched.size(),
                                     static_cast<double>(n1),
                                     static_cast<double>(n2));
        for (std::uint32_t c : sc.touched) { sc.a[c] = 0; sc.b[c] = 0; }
        return v;
    }

    // R x num_scales matrix of statistics under pooled-label permutations.
    // Each replicate r has its own derived stream, so the result is identical
    // for any thread count.
    std::vector<double> run(int R, std::uint64_t master) const {
        const std::size_t S = slot.size();
        std::vector<double> out(static_cast<std::size_t>(R) * S);
        const std::size_t chunks =
            std::max<std::size_t>(1, std::min<std::size_t>(max_threads(),
                                                           static_cast<std::size_t>(R)));
        parallel_for(chunks, [&](std::size_t chunk) {
            Scratch sc(*this);
            std::vector<std::uint32_t> order(n);
            const auto lo = static_cast<std::size_t>(R) * chunk / chunks;
            const auto hi = static_cast<std::size_t>(R) * (chunk + 1) / chunks;
            for (std::size_t r = lo; r < hi; ++r) {
                Rng rr = make_rng(master, r);
                std::iota(order.begin(), order.end(), 0u);
                for (std::size_t i = n - 1; i > 0; --i) {
                    const auto j = static_cast<std::size_t>(uniform_below(rr, i + 1));
                    std::swap(order[i], order[j]);
                }
                for (std::size_t si = 0; si < S; ++si)
                    out[r * S + si] = eval(si, order.data(), sc);
            }
        });
        return out;
    }
};

} // namespace

double chi2_statistic(const TwoSampleInput& in, std::uint32_t m) {
    validate_input(in, 1, 1);
    PermEngine eng(in, {m}, /*use_chi2=*/true);
    PermEngine::Scratch sc(eng);
    std::vector<std::uint32_t> order(eng.n);
    std::iota(order.begin(), order.end(), 0u);
    return eng.eval(0, order.data(), sc);
}

double u_statistic(const TwoSampleInput& in, std::uint32_t m) {
    validate_input(in, 2, 2);
    PermEngine eng(in, {m}, /*use_chi2=*/false);
    PermEngine::Scratch sc(eng);
    std::vector<std::uint32_t> order(eng.n);
    std::iota(order.begin(), order.end(), 0u);
    return eng.eval(0, order.data(), sc);
}

double u_kernel(const double* v1, const double* v2, const double* w1,
                const double* w2, std::size_t d, std::uint32_t m) {
    cube_cell_count(m, d);
    const std::uint64_t cv1 = cube_cell_index(v1, d, m);
    const std::uint64_t cv2 = cube_cell_index(v2, d, m);
    const std::uint64_t cw1 = cube_cell_index(w1, d, m);
    const std::uint64_t cw2 = cube_cell_index(w2, d, m);
    double k = 0.0;
    if (cv1 == cv2) k += 1.0;
    if (cw1 == cw2) k += 1.0;
    if (cv1 == cw2) k -= 1.0;
    if (cv2 == cw1) k -= 1.0;
    return k;
}

std::uint32_t two_sample_optimal_bins(std::size_t n1, std::size_t n2, double s,
                                      std::size_t d) {
    if (n1 < 1 || n2 < 1)
        throw InvalidArgumentError("two_sample_optimal_bins: empty sample");
    if (!(s > 0.0)) throw InvalidArgumentError("two_sample_optimal_bins: s must be positive");
    if (d < 1) throw InvalidArgumentError("two_sample_optimal_bins: d must be >= 1");
    const double nmin = static_cast<double>(std::min(n1, n2));
    const double v = std::pow(nmin, 2.0 / (4.0 * s + static_cast<double>(d)));
    auto m = static_cast<std::uint64_t>(std::floor(v + 1e-9));
    if (m < 1) m = 1;
    if (m > 0xFFFFFFFFull) throw InvalidArgumentError("two_sample_optimal_bins: m overflows");
    return static_cast<std::uint32_t>(m);
}

std::uint32_t two_sample_num_scales(std::size_t n1, std::size_t n2, std::size_t d) {
    if (d < 1) throw InvalidArgumentError("two_sample_num_scales: d must be >= 1");
    const std::size_t nmin = std::min(n1, n2);
    if (nmin < 16)
        throw InvalidArgumentError("two_sample_num_scales: need min(n1,n2) >= 16");
    const double dn = static_cast<double>(nmin);
    const double x = (2.0 / static_cast<double>(d)) *
                     std::log2(dn / std::log(std::log(dn)));
    auto B = static_cast<std::int64_t>(std::ceil(x - 1e-9));
    if (B < 1) B = 1;
    return static_cast<std::uint32_t>(B);
}

namespace {

TestReport run_perm_test(const TwoSampleInput& in,
                         const std::vector<std::uint32_t>& scales, double alpha,
                         int num_perms, Rng& rng, const char* method) {
    check_alpha(alpha);
    validate_input(in, 2, 2);
    if (num_perms < 1) throw InvalidArgumentError("num_perms must be >= 1");
    const std::size_t S = scales.size();
    const double level = alpha / static_cast<double>(S);

    TestReport rep;
    rep.method = method;
    rep.alpha = alpha;
    rep.bins = scales;
    rep.n = in.n1() + in.n2();
    rep.source = "permutation";

    int R = num_perms;
    const int needed =
        static_cast<int>(std::ceil(static_cast<double>(S) / alpha - 1e-9)) - 1;
    if (R < needed) {
        R = needed;
        rep.warnings.push_back("permutation count raised to " + std::to_string(R) +
                               " so that the per-scale level is attainable");
    }

    const PermEngine eng(in, scales, /*use_chi2=*/false);
    PermEngine::Scratch sc(eng);
    std::vector<std::uint32_t> order(eng.n);
    std::iota(order.begin(), order.end(), 0u);

    const std::uint64_t master = rng();
    rep.seed = master;
    const std::vector<double> mat = eng.run(R, master);

    rep.scales.resize(S);
    for (std::size_t si = 0; si < S; ++si) {
        const double obs = eng.eval(si, order.data(), sc);
        std::size_t ge = 0;
        std::vector<double> col(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            const double v = mat[static_cast<std::size_t>(r) * S + si];
            col[static_cast<std::size_t>(r)] = v;
            if (v >= obs) ++ge;
        }
        // tie-safe permutation p-value; ties among replicates count against
        // rejection so that the level bound survives atoms
        const double p = (1.0 + static_cast<double>(ge)) / (static_cast<double>(R) + 1.0);
        auto th = order_stat_threshold(col, level);
        auto& scale = rep.scales[si];
        scale.m = scales[si];
        scale.statistic = obs;
        scale.critical_value = th.threshold;
        scale.reject = p <= level;
        rep.achieved_level = th.achieved_level;
        if (scale.reject && rep.first_reject_scale == 0)
            rep.first_reject_scale = static_cast<int>(si + 1);
    }
    rep.reject = rep.first_reject_scale != 0;
    const auto& lead = rep.reject ? rep.scales[rep.first_reject_scale - 1] : rep.scales[0];
    rep.statistic = lead.statistic;
    rep.critical_value = lead.critical_value;
    return rep;
}

} // namespace

TestReport permutation_u_test(const TwoSampleInput& in, std::uint32_t m,
                              double alpha, int num_perms, Rng& rng) {
    return run_perm_test(in, {m}, alpha, num_perms, rng, "two-sample-perm");
}

TestReport multiscale_permutation_test(const TwoSampleInput& in, double alpha,
                                       int num_perms, Rng& rng) {
    validate_input(in, 2, 2);
    const std::uint32_t B = two_sample_num_scales(in.n1(), in.n2(), in.d);
    if (B >= 32) throw InvalidArgumentError("multiscale two-sample: scale grid too large");
    std::vector<std::uint32_t> scales(B);
    for (std::uint32_t b = 0; b < B; ++b) scales[b] = 1u << (b + 1);
    return run_perm_test(in, scales, alpha, num_perms, rng, "two-sample-multiscale");
}

// ---------------------------------------------------------------------------
// Splitting calibration test and cross-fitting.

namespace {

std::uint32_t draw_label(const double* z, std::uint32_t K, Rng& rng) {
    const double u = uniform01(rng);
    double c = 0.0;
    for (std::uint32_t k = 0; k + 1 < K; ++k) {
        c += z[k];
        if (u < c) return k;
    }
    return K - 1;
}

struct SplitCore {
    std::size_t n = 0;    // even, after any drop
    std::size_t half = 0; // first half = [0, half)
    std::vector<std::uint32_t> ytilde; // synthetic labels for the second half
};

SplitCore make_split(const CalibrationSample& s, std::size_t n_even, Rng& rng) {
    SplitCore c;
    c.n = n_even;
    c.half = n_even / 2;
    c.ytilde.resize(c.n - c.half);
    for (std::size_t i = c.half; i < c.n; ++i)
        c.ytilde[i - c.half] = draw_label(s.row(i), s.K, rng);
    return c;
}

// T1_k = (1/n) sum([Y]_k - Z_k),  T2_k = (1/n) sum(Z_k ([Y]_k - Z_k)),
// over the first n rows with the original labels.
void moment_stats(const CalibrationSample& s, std::size_t n,
                  std::vector<double>& t1, std::vector<double>& t2) {
    const std::uint32_t K = s.K;
    std::vector<KahanSum> a1(K), a2(K);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = s.row(i);
        const std::uint32_t yi = s.y[i];
        for (std::uint32_t k = 0; k < K; ++k) {
            const double diff = (yi == k ? 1.0 : 0.0) - z[k];
            a1[k].add(diff);
            a2[k].add(z[k] * diff);
        }
    }
    t1.resize(K);
    t2.resize(K);
    for (std::uint32_t k = 0; k < K; ++k) {
        t1[k] = a1[k].value() / static_cast<double>(n);
        t2[k] = a2[k].value() / static_cast<double>(n);
    }
}

// V_k: first-half predictions whose real label is k; W_k: second-half
// predictions whose synthetic label is k.  Points enter through the chart
// dropping the last simplex coordinate, so d = K - 1.
void build_vw(const CalibrationSample& s, const SplitCore& c, std::uint32_t k,
              TwoSampleInput& io) {
    const std::uint32_t K = s.K;
    io.d = K - 1;
    io.V.clear();
    io.W.clear();
    for (std::size_t i = 0; i < c.half; ++i)
        if (s.y[i] == k) {
            const double* z = s.row(i);
            io.V.insert(io.V.end(), z, z + K - 1);
        }
    for (std::size_t i = c.half; i < c.n; ++i)
        if (c.ytilde[i - c.half] == k) {
            const double* z = s.row(i);
            io.W.insert(io.W.end(), z, z + K - 1);
        }
}

double class_stat(const TwoSampleInput& io, double smoothness, TsChoice ts) {
    const std::uint32_t m =
        two_sample_optimal_bins(io.n1(), io.n2(), smoothness, io.d);
    return ts == TsChoice::Chi2MC ? chi2_statistic(io, m) : u_statistic(io, m);
}

void check_split_args(const CalibrationSample& s, double alpha, double beta,
                      double smoothness) {
    check_alpha(alpha);
    if (!(beta > 0.0 && beta < 1.0))
        throw InvalidArgumentError("beta must be in (0,1)");
    if (!(smoothness > 0.0))
        throw InvalidArgumentError("smoothness must be positive");
    if (s.n < 4) throw InvalidArgumentError("splitting test: need n >= 4");
    if (s.K < 2) throw InvalidArgumentError("splitting test: need K >= 2");
}

} // namespace

SplitChi2Calibration calibrate_split_chi2(const SyntheticModel& null_model,
                                          std::size_t n, double alpha,
                                          double smoothness, int num_sims,
                                          std::uint64_t seed) {
    check_alpha(alpha);
    if (!(smoothness > 0.0))
        throw InvalidArgumentError("calibrate_split_chi2: smoothness must be positive");
    if (n < 4) throw InvalidArgumentError("calibrate_split_chi2: need n >= 4");
    if (num_sims < 1) throw InvalidArgumentError("calibrate_split_chi2: need num_sims >= 1");
    const std::uint32_t K = null_model.K;
    const std::size_t n_even = n - (n % 2);
    const double ninf = -std::numeric_limits<double>::infinity();

    std::vector<double> mat(static_cast<std::size_t>(num_sims) * K, ninf);
    const std::size_t chunks = std::max<std::size_t>(
        1, std::min<std::size_t>(max_threads(), static_cast<std::size_t>(num_sims)));
    parallel_for(chunks, [&](std::size_t chunk) {
        CalibrationSample buf;
        TwoSampleInput io;
        const auto lo = static_cast<std::size_t>(num_sims) * chunk / chunks;
        const auto hi = static_cast<std::size_t>(num_sims) * (chunk + 1) / chunks;
        for (std::size_t sim = lo; sim < hi; ++sim) {
            Rng rr = make_rng(seed, sim);
            sample(null_model, n_even, rr, buf);
            const SplitCore c = make_split(buf, n_even, rr);
            for (std::uint32_t k = 0; k < K; ++k) {
                build_vw(buf, c, k, io);
                if (io.n1() >= 2 && io.n2() >= 2)
                    mat[sim * K + k] = class_stat(io, smoothness, TsChoice::Chi2MC);
            }
        }
    });

    SplitChi2Calibration cal;
    cal.n = n_even;
    cal.critical.resize(K);
    const double level = alpha / (3.0 * static_cast<double>(K));
    std::vector<double> col(static_cast<std::size_t>(num_sims));
    for (std::uint32_t k = 0; k < K; ++k) {
        for (int sim = 0; sim < num_sims; ++sim)
            col[static_cast<std::size_t>(sim)] =
                mat[static_cast<std::size_t>(sim) * K + k];
        auto th = order_stat_threshold(col, level);
        double q = th.threshold;
        // a quantile of -inf means the branch was nearly always undefined in
        // the simulations; disable it rather than let it fire spuriously
        if (q == ninf) q = std::numeric_limits<double>::infinity();
        cal.critical[k] = q;
    }
    return cal;
}

TestReport splitting_calibration_test(const CalibrationSample& s, double alpha,
                                      const SplitOptions& opt, Rng& rng) {
    check_split_args(s, alpha, opt.beta, opt.smoothness);
    if (opt.ts == TsChoice::Chi2MC) {
        if (opt.chi2_calibration == nullptr)
            throw InvalidArgumentError(
                "splitting test: Chi2MC needs precomputed critical values");
        if (opt.chi2_calibration->critical.size() != s.K)
            throw InvalidArgumentError(
                "splitting test: calibration has the wrong number of classes");
    }
    const std::size_t n_even = s.n - (s.n % 2);
    if (opt.ts == TsChoice::Chi2MC && opt.chi2_calibration->n != n_even)
        throw InvalidArgumentError(
            "splitting test: calibration was computed for a different sample size");

    TestReport rep;
    rep.method = "split";
    rep.alpha = alpha;
    rep.beta = opt.beta;
    rep.smoothness = opt.smoothness;
    rep.n = s.n;
    rep.K = s.K;
    rep.source = opt.ts == TsChoice::Permutation ? "permutation" : "mc";

    const SplitCore core = make_split(s, n_even, rng);
    rep.split.split_at = core.half;
    rep.split.dropped = s.n - n_even;
    rep.split.ytilde = core.ytilde;

    std::vector<double> t1, t2;
    moment_stats(s, n_even, t1, t2);
    const double thr =
        std::sqrt(3.0 * static_cast<double>(s.K) / (alpha * static_cast<double>(n_even)));
    const double level = alpha / (3.0 * static_cast<double>(s.K));
    rep.critical_value = thr;

    TwoSampleInput io;
    double max_moment = 0.0;
    for (std::uint32_t k = 0; k < s.K; ++k) {
        TestReport::SplitClass sc;
        sc.t1 = t1[k];
        sc.t2 = t2[k];
        sc.t1_fire = std::abs(t1[k]) >= thr;
        sc.t2_fire = std::abs(t2[k]) >= thr;
        max_moment = std::max({max_moment, std::abs(t1[k]), std::abs(t2[k])});
        build_vw(s, core, k, io);
        sc.v_size = io.n1();
        sc.w_size = io.n2();
        if (sc.v_size < 2 || sc.w_size < 2) {
            sc.ts_skipped = true;
            rep.warnings.push_back("class " + std::to_string(k + 1) +
                                   ": two-sample branch skipped (fewer than 2 points)");
        } else if (opt.ts == TsChoice::Permutation) {
            const std::uint32_t m =
                two_sample_optimal_bins(sc.v_size, sc.w_size, opt.smoothness, io.d);
            TestReport sub = permutation_u_test(io, m, level, opt.num_perms, rng);
            sc.ts_statistic = sub.statistic;
            sc.ts_critical = sub.critical_value;
            sc.ts_fire = sub.reject;
            for (const auto& w : sub.warnings)
                rep.warnings.push_back("class " + std::to_string(k + 1) + ": " + w);
        } else {
            sc.ts_statistic = class_stat(io, opt.smoothness, TsChoice::Chi2MC);
            sc.ts_critical = opt.chi2_calibration->critical[k];
            sc.ts_fire = sc.ts_statistic >= sc.ts_critical;
        }
        if (sc.t1_fire || sc.t2_fire || sc.ts_fire) rep.reject = true;
        rep.split.classes.push_back(sc);
    }
    rep.statistic = max_moment; // scalar summary: the moment screens only;
                                // the full decision also ORs the per-class
                                // two-sample branches recorded in rep.split
    return rep;
}

namespace {

struct CrossFitValues {
    std::vector<double> stat;            // averaged per class; NaN if skipped
    std::vector<std::uint8_t> skipped;
    std::vector<std::size_t> v_size, w_size; // first-order sizes, for traces
    std::vector<std::uint32_t> ytilde2;      // second-half synthetic labels
};

// Statistic of the cross-fitted test: for each class, the two-sample statistic
// with (first half = real, second half = synthetic) averaged with the value
// from the swapped roles (fresh synthetic labels for the first half).
CrossFitValues cross_fit_values(const CalibrationSample& s, std::size_t n_even,
                                double smoothness, TsChoice ts, Rng& rng) {
    const std::uint32_t K = s.K;
    const std::size_t half = n_even / 2;
    CrossFitValues out;
    out.stat.assign(K, std::numeric_limits<double>::quiet_NaN());
    out.skipped.assign(K, 0);
    out.v_size.assign(K, 0);
    out.w_size.assign(K, 0);

    out.ytilde2.resize(n_even - half);
    for (std::size_t i = half; i < n_even; ++i)
        out.ytilde2[i - half] = draw_label(s.row(i), K, rng);
    std::vector<std::uint32_t> ytilde1(half);
    for (std::size_t i = 0; i < half; ++i)
        ytilde1[i] = draw_label(s.row(i), K, rng);

    TwoSampleInput a, b;
    a.d = K - 1;
    b.d = K - 1;
    for (std::uint32_t k = 0; k < K; ++k) {
        a.V.clear(); a.W.clear();
        b.V.clear(); b.W.clear();
        for (std::size_t i = 0; i < half; ++i) {
            const double* z = s.row(i);
            if (s.y[i] == k) a.V.insert(a.V.end(), z, z + K - 1);
            if (ytilde1[i] == k) b.W.insert(b.W.end(), z, z + K - 1);
        }
        for (std::size_t i = half; i < n_even; ++i) {
            const double* z = s.row(i);
            if (out.ytilde2[i - half] == k) a.W.insert(a.W.end(), z, z + K - 1);
            if (s.y[i] == k) b.V.insert(b.V.end(), z, z + K - 1);
        }
        out.v_size[k] = a.n1();
        out.w_size[k] = a.n2();
        if (a.n1() < 2 || a.n2() < 2 || b.n1() < 2 || b.n2() < 2) {
            out.skipped[k] = 1;
            continue;
        }
        out.stat[k] = 0.5 * (class_stat(a, smoothness, ts) +
                             class_stat(b, smoothness, ts));
    }
    return out;
}

} // namespace

std::vector<double> split_class_statistics(const CalibrationSample& s,
                                           double smoothness, TsChoice ts,
                                           Rng& rng) {
    check_split_args(s, 0.5, 0.5, smoothness);
    const std::size_t n_even = s.n - (s.n % 2);
    const SplitCore core = make_split(s, n_even, rng);
    std::vector<double> out(s.K, std::numeric_limits<double>::quiet_NaN());
    TwoSampleInput io;
    for (std::uint32_t k = 0; k < s.K; ++k) {
        build_vw(s, core, k, io);
        if (io.n1() >= 2 && io.n2() >= 2)
            out[k] = class_stat(io, smoothness, ts);
    }
    return out;
}

std::vector<double> cross_fit_class_statistics(const CalibrationSample& s,
                                               double smoothness, TsChoice ts,
                                               Rng& rng) {
    check_split_args(s, 0.5, 0.5, smoothness);
    const std::size_t n_even = s.n - (s.n % 2);
    CrossFitValues v = cross_fit_values(s, n_even, smoothness, ts, rng);
    return v.stat;
}

TestReport cross_fit_splitting_test(const CalibrationSample& s, double alpha,
                                    const CrossFitOptions& opt, Rng& rng) {
    check_split_args(s, alpha, opt.beta, opt.smoothness);
    if (opt.num_sims < 1)
        throw InvalidArgumentError("cross-fit test: need num_sims >= 1");
    if (opt.null_model != nullptr && opt.null_model->K != s.K)
        throw InvalidArgumentError("cross-fit test: null model has a different K");
    const std::size_t n_even = s.n - (s.n % 2);
    const std::uint32_t K = s.K;

    TestReport rep;
    rep.method = "crossfit";
    rep.alpha = alpha;
    rep.beta = opt.beta;
    rep.smoothness = opt.smoothness;
    rep.n = s.n;
    rep.K = K;
    rep.source = opt.null_model != nullptr ? "oracle" : "consistency";

    std::vector<double> t1, t2;
    moment_stats(s, n_even, t1, t2);
    const double thr =
        std::sqrt(3.0 * static_cast<double>(K) / (alpha * static_cast<double>(n_even)));
    const double level = alpha / (3.0 * static_cast<double>(K));

    const CrossFitValues obs = cross_fit_values(s, n_even, opt.smoothness, opt.ts, rng);
    rep.split.split_at = n_even / 2;
    rep.split.dropped = s.n - n_even;
    rep.split.ytilde = obs.ytilde2;

    // per-class critical values: Monte-Carlo quantiles of the same averaged
    // statistic under the calibrated null (oracle model when available,
    // consistency resampling of the observed predictions otherwise)
    const std::uint64_t master = rng();
    rep.seed = master;
    const double ninf = -std::numeric_limits<double>::infinity();
    const int N = opt.num_sims;
    std::vector<double> mat(static_cast<std::size_t>(N) * K, ninf);
    const std::size_t chunks = std::max<std::size_t>(
        1, std::min<std::size_t>(max_threads(), static_cast<std::size_t>(N)));
    parallel_for(chunks, [&](std::size_t chunk) {
        CalibrationSample buf;
        buf.K = K;
        const auto lo = static_cast<std::size_t>(N) * chunk / chunks;
        const auto hi = static_cast<std::size_t>(N) * (chunk + 1) / chunks;
        for (std::size_t sim = lo; sim < hi; ++sim) {
            Rng rr = make_rng(master, sim);
            if (opt.null_model != nullptr) {
                sample(*opt.null_model, n_even, rr, buf);
            } else {
                buf.n = n_even;
                buf.p.resize(n_even * K);
                buf.y.resize(n_even);
                for (std::size_t j = 0; j < n_even; ++j) {
                    const auto src = static_cast<std::size_t>(uniform_below(rr, n_even));
                    const double* z = s.row(src);
                    std::copy(z, z + K, buf.p.begin() + j * K);
                    buf.y[j] = draw_label(z, K, rr);
                }
            }
            const CrossFitValues v =
                cross_fit_values(buf, n_even, opt.smoothness, opt.ts, rr);
            for (std::uint32_t k = 0; k < K; ++k)
                if (!v.skipped[k]) mat[sim * K + k] = v.stat[k];
        }
    });

    std::vector<double> critical(K);
    std::vector<double> col(static_cast<std::size_t>(N));
    for (std::uint32_t k = 0; k < K; ++k) {
        for (int sim = 0; sim < N; ++sim)
            col[static_cast<std::size_t>(sim)] =
                mat[static_cast<std::size_t>(sim) * K + k];
        auto th = order_stat_threshold(col, level);
        double q = th.threshold;
        if (q == ninf) q = std::numeric_limits<double>::infinity();
        critical[k] = q;
    }

    double max_moment = 0.0;
    for (std::uint32_t k = 0; k < K; ++k) {
        TestReport::SplitClass sc;
        sc.t1 = t1[k];
        sc.t2 = t2[k];
        sc.t1_fire = std::abs(t1[k]) >= thr;
        sc.t2_fire = std::abs(t2[k]) >= thr;
        max_moment = std::max({max_moment, std::abs(t1[k]), std::abs(t2[k])});
        sc.v_size = obs.v_size[k];
        sc.w_size = obs.w_size[k];
        if (obs.skipped[k]) {
            sc.ts_skipped = true;
            rep.warnings.push_back("class " + std::to_string(k + 1) +
                                   ": two-sample branch skipped (fewer than 2 points)");
        } else {
            sc.ts_statistic = obs.stat[k];
            sc.ts_critical = critical[k];
            sc.ts_fire = sc.ts_statistic >= sc.ts_critical;
        }
        if (sc.t1_fire || sc.t2_fire || sc.ts_fire) rep.reject = true;
        rep.split.classes.push_back(sc);
    }
    rep.statistic = max_moment;
    rep.critical_value = thr;
    return rep;
}

} // namespace tcal
