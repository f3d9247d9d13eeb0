#include <doctest.h>

#include "tcal/common.hpp"
#include "tcal/sample.hpp"
#include "tcal/synthetic.hpp"
#include "tcal/two_sample.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

using namespace tcal;

namespace {

TwoSampleInput make_input(std::size_t d, std::vector<double> V, std::vector<double> W) {
    TwoSampleInput in;
    in.d = d;
    in.V = std::move(V);
    in.W = std::move(W);
    return in;
}

// U-statistic straight from its definition: the average of the four-point
// kernel over ordered pairs (i, i'), (j, j') of distinct indices.
double brute_force_u(const TwoSampleInput& in, std::uint32_t m) {
    const std::size_t n1 = in.n1(), n2 = in.n2(), d = in.d;
    long double acc = 0.0L;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t ip = 0; ip < n1; ++ip) {
            if (ip == i) continue;
            for (std::size_t j = 0; j < n2; ++j)
                for (std::size_t jp = 0; jp < n2; ++jp) {
                    if (jp == j) continue;
                    acc += u_kernel(&in.V[i * d], &in.V[ip * d], &in.W[j * d],
                                    &in.W[jp * d], d, m);
                }
        }
    const long double denom = static_cast<long double>(n1) * (n1 - 1) *
                              static_cast<long double>(n2) * (n2 - 1);
    return static_cast<double>(acc / denom);
}

CalibrationSample constant_prediction_sample(std::size_t n, double z0,
                                             bool alternate_labels) {
    CalibrationSample s;
    s.K = 2;
    double z[2] = {z0, 1.0 - z0};
    for (std::size_t i = 0; i < n; ++i)
        s.push_row(z, alternate_labels ? static_cast<std::uint32_t>(i % 2) : 0u);
    return s;
}

bool has_warning(const TestReport& r, const std::string& needle) {
    for (const auto& w : r.warnings)
        if (w.find(needle) != std::string::npos) return true;
    return false;
}

double sample_variance(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

} // namespace

TEST_SUITE("two_sample") {

TEST_CASE("cube cell count: values and overflow") {
    CHECK(cube_cell_count(10, 3) == 1000);
    CHECK(cube_cell_count(1, 77) == 1);
    CHECK(cube_cell_count(5, 1) == 5);
    CHECK(cube_cell_count(2, 63) == 9223372036854775808ull);
    CHECK(cube_cell_count(3, 40) == 12157665459056928801ull);
    CHECK_THROWS_AS(cube_cell_count(2, 64), InvalidArgumentError);
    CHECK_THROWS_AS(cube_cell_count(3, 41), InvalidArgumentError);
    CHECK_THROWS_AS(cube_cell_count(0, 3), InvalidArgumentError);
    CHECK_THROWS_AS(cube_cell_count(4, 0), InvalidArgumentError);
}

TEST_CASE("cube cell index: axis order, folding, and range checks") {
    double a[1] = {0.0};
    CHECK(cube_cell_index(a, 1, 4) == 0);
    a[0] = 0.24;
    CHECK(cube_cell_index(a, 1, 4) == 0);
    a[0] = 0.25; // left-closed cells
    CHECK(cube_cell_index(a, 1, 4) == 1);
    a[0] = 1.0; // the closed upper face folds into the last cell
    CHECK(cube_cell_index(a, 1, 4) == 3);

    double b[2] = {0.5, 0.9}; // first coordinate is the least significant digit
    CHECK(cube_cell_index(b, 2, 3) == 1 + 2 * 3);
    double c[2] = {1.0, 0.0};
    CHECK(cube_cell_index(c, 2, 3) == 2);

    double tol[1] = {-1e-10}; // tiny excursions clamp instead of throwing
    CHECK(cube_cell_index(tol, 1, 4) == 0);
    tol[0] = 1.0 + 1e-10;
    CHECK(cube_cell_index(tol, 1, 4) == 3);
    tol[0] = 1.1;
    CHECK_THROWS_AS(cube_cell_index(tol, 1, 4), DataError);
    tol[0] = -0.5;
    CHECK_THROWS_AS(cube_cell_index(tol, 1, 4), DataError);
}

TEST_CASE("chi-squared statistic: hand values and exact symmetry") {
    auto in = make_input(1, {0.1}, {0.9});
    CHECK(chi2_statistic(in, 2) == 2.0); // (1*1-1*0)^2 + (1*0-1*1)^2

    auto same = make_input(1, {0.1, 0.6, 0.6, 0.9}, {0.1, 0.6, 0.6, 0.9});
    CHECK(chi2_statistic(same, 4) == 0.0);

    auto fwd = make_input(2, {0.1, 0.2, 0.8, 0.3, 0.4, 0.9},
                          {0.15, 0.25, 0.85, 0.35});
    auto rev = make_input(2, fwd.W, fwd.V);
    for (std::uint32_t m : {1u, 2u, 5u})
        CHECK(chi2_statistic(fwd, m) == chi2_statistic(rev, m));
}

TEST_CASE("U-statistic hand values and size guard") {
    auto zero = make_input(1, {0.1, 0.2}, {0.1, 0.2});
    CHECK(u_statistic(zero, 2) == 0.0);

    auto sep = make_input(1, {0.1, 0.2}, {0.8, 0.9});
    CHECK(u_statistic(sep, 2) == 2.0); // fully separated cells

    auto tiny = make_input(1, {0.1}, {0.8, 0.9});
    CHECK_THROWS_AS(u_statistic(tiny, 2), InvalidArgumentError);
    auto badlen = make_input(2, {0.1, 0.2, 0.3}, {0.4, 0.5, 0.6, 0.7});
    CHECK_THROWS_AS(u_statistic(badlen, 2), InvalidArgumentError);
}

TEST_CASE("four-point kernel is symmetric under swapping the two samples") {
    Rng rng = make_rng(401, 0);
    for (int rep = 0; rep < 200; ++rep) {
        double pts[8];
        for (double& x : pts) x = uniform01(rng);
        const std::uint32_t m = 1 + static_cast<std::uint32_t>(uniform_below(rng, 5));
        CHECK(u_kernel(pts, pts + 2, pts + 4, pts + 6, 2, m) ==
              u_kernel(pts + 4, pts + 6, pts, pts + 2, 2, m));
    }
}

TEST_CASE("counting form of the U-statistic equals the kernel average") {
    Rng rng = make_rng(403, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 1 + uniform_below(rng, 2);
        const std::size_t n1 = 2 + uniform_below(rng, 9);
        const std::size_t n2 = 2 + uniform_below(rng, 9);
        const std::uint32_t m = 1 + static_cast<std::uint32_t>(uniform_below(rng, 5));
        TwoSampleInput in;
        in.d = d;
        in.V.resize(n1 * d);
        in.W.resize(n2 * d);
        for (double& x : in.V) x = uniform01(rng);
        for (double& x : in.W) x = uniform01(rng);
        CHECK(u_statistic(in, m) ==
              doctest::Approx(brute_force_u(in, m)).epsilon(1e-12));
    }
}

TEST_CASE("grid scale and scale count for two-sample tests") {
    CHECK(two_sample_optimal_bins(1000, 1000, 1.0, 1) == 15);
    CHECK(two_sample_optimal_bins(200, 200, 1.0, 1) == 8);
    CHECK(two_sample_optimal_bins(50, 1000, 1.0, 1) == 4); // min(n1, n2) rules
    CHECK(two_sample_optimal_bins(1, 1, 1.0, 3) == 1);
    CHECK_THROWS_AS(two_sample_optimal_bins(0, 5, 1.0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(two_sample_optimal_bins(5, 5, 0.0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(two_sample_optimal_bins(5, 5, 1.0, 0), InvalidArgumentError);

    CHECK(two_sample_num_scales(1000, 1000, 1) == 19);
    CHECK(two_sample_num_scales(16, 16, 1) == 8);
    CHECK_THROWS_AS(two_sample_num_scales(15, 1000, 1), InvalidArgumentError);
    CHECK_THROWS_AS(two_sample_num_scales(100, 100, 0), InvalidArgumentError);
}

TEST_CASE("permutation test is deterministic and thread-count independent") {
    Rng gen = make_rng(405, 0);
    TwoSampleInput in;
    in.d = 1;
    in.V.resize(40);
    in.W.resize(35);
    for (double& x : in.V) x = uniform01(gen);
    for (double& x : in.W) x = uniform01(gen);

    Rng r1 = make_rng(405, 1);
    TestReport a = permutation_u_test(in, 5, 0.1, 99, r1);
    CHECK(a.method == "two-sample-perm");
    CHECK(a.source == "permutation");
    CHECK(a.n == 75);

    Rng r2 = make_rng(405, 1);
    TestReport b = permutation_u_test(in, 5, 0.1, 99, r2);
    CHECK(a.statistic == b.statistic);
    CHECK(a.critical_value == b.critical_value);
    CHECK(a.reject == b.reject);

    set_max_threads(1);
    Rng r3 = make_rng(405, 1);
    TestReport c = permutation_u_test(in, 5, 0.1, 99, r3);
    set_max_threads(5);
    Rng r4 = make_rng(405, 1);
    TestReport d = permutation_u_test(in, 5, 0.1, 99, r4);
    set_max_threads(0);
    CHECK(c.statistic == d.statistic);
    CHECK(c.critical_value == d.critical_value);
    CHECK(c.reject == d.reject);
}

TEST_CASE("permutation test raises an infeasible permutation count") {
    auto in = make_input(1, {0.1, 0.2, 0.3}, {0.7, 0.8, 0.9});
    Rng rng = make_rng(407, 0);
    TestReport r = permutation_u_test(in, 2, 0.05, 5, rng);
    CHECK(has_warning(r, "raised to 19"));
    CHECK_THROWS_AS(permutation_u_test(in, 2, 0.05, 0, rng), InvalidArgumentError);
}

TEST_CASE("permutation test on a degenerate pooled sample never rejects") {
    TwoSampleInput in;
    in.d = 1;
    in.V.assign(10, 0.4);
    in.W.assign(12, 0.4);
    Rng rng = make_rng(409, 0);
    TestReport r = permutation_u_test(in, 8, 0.1, 29, rng);
    CHECK(r.statistic == 0.0);
    CHECK_FALSE(r.reject);
}

TEST_CASE("permutation test separates disjoint supports") {
    Rng gen = make_rng(411, 0);
    TwoSampleInput in;
    in.d = 1;
    for (int i = 0; i < 40; ++i) in.V.push_back(0.4 * uniform01(gen));
    for (int i = 0; i < 40; ++i) in.W.push_back(0.6 + 0.4 * uniform01(gen));
    Rng rng = make_rng(411, 1);
    TestReport r = permutation_u_test(in, 4, 0.05, 99, rng);
    CHECK(r.reject);
    CHECK(r.statistic > r.critical_value);
}

TEST_CASE("permutation test keeps level under exchangeability") {
    const int trials = 1000;
    int rejects = 0;
    TwoSampleInput in;
    in.d = 1;
    in.V.resize(30);
    in.W.resize(30);
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(413, static_cast<std::uint64_t>(t));
        for (double& x : in.V) x = uniform01(rng);
        for (double& x : in.W) x = uniform01(rng);
        rejects += permutation_u_test(in, 4, 0.2, 49, rng).reject;
    }
    const double rate = static_cast<double>(rejects) / trials;
    CHECK(rate <= 0.2 + 2 * std::sqrt(0.2 * 0.8 / trials));
    CHECK(rate >= 0.08); // the test is tie-safe, not vacuous
}

TEST_CASE("multiscale permutation test runs the dyadic grid at level alpha/B") {
    Rng gen = make_rng(417, 0);
    TwoSampleInput in;
    in.d = 1;
    in.V.resize(100);
    in.W.resize(100);
    for (double& x : in.V) x = uniform01(gen);
    for (double& x : in.W) x = uniform01(gen);

    Rng rng = make_rng(417, 1);
    TestReport r = multiscale_permutation_test(in, 0.05, 300, rng);
    CHECK(r.method == "two-sample-multiscale");
    REQUIRE(r.scales.size() == 13); // two_sample_num_scales(100, 100, 1)
    for (std::size_t b = 0; b < r.scales.size(); ++b)
        CHECK(r.scales[b].m == (1u << (b + 1)));
    bool any = false;
    for (const auto& sc : r.scales) any = any || sc.reject;
    CHECK(r.reject == any);
    CHECK_FALSE(has_warning(r, "raised")); // 300 >= 13/alpha - 1

    Rng rng2 = make_rng(417, 2);
    TestReport raised = multiscale_permutation_test(in, 0.05, 50, rng2);
    CHECK(has_warning(raised, "raised to 259"));

    TwoSampleInput tiny = make_input(1, std::vector<double>(15, 0.5),
                                     std::vector<double>(40, 0.5));
    Rng rng3 = make_rng(417, 3);
    CHECK_THROWS_AS(multiscale_permutation_test(tiny, 0.05, 50, rng3),
                    InvalidArgumentError);
}

TEST_CASE("multiscale permutation test finds a localized discrepancy") {
    Rng gen = make_rng(419, 0);
    TwoSampleInput in;
    in.d = 1;
    for (int i = 0; i < 150; ++i) in.V.push_back(uniform01(gen));
    // W concentrates a quarter of its mass on one narrow cell
    for (int i = 0; i < 150; ++i)
        in.W.push_back(i % 4 == 0 ? 0.5 + 0.01 * uniform01(gen) : uniform01(gen));
    Rng rng = make_rng(419, 1);
    TestReport r = multiscale_permutation_test(in, 0.05, 400, rng);
    CHECK(r.reject);
    CHECK(r.first_reject_scale >= 1);
}

TEST_CASE("splitting test: moment threshold and odd-size drop") {
    SyntheticModel p0 = calibrated_uniform_model(2);
    Rng gen = make_rng(421, 0);
    CalibrationSample s = sample(p0, 120, gen);
    SplitOptions opt;
    opt.num_perms = 119;
    Rng rng = make_rng(421, 1);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    CHECK(r.method == "split");
    CHECK(r.source == "permutation");
    CHECK(r.critical_value == doctest::Approx(1.0).epsilon(1e-12)); // sqrt(3K/(alpha n))
    CHECK(r.split.split_at == 60);
    CHECK(r.split.dropped == 0);
    CHECK(r.split.ytilde.size() == 60);

    CalibrationSample odd = sample(p0, 121, gen);
    Rng rng2 = make_rng(421, 2);
    TestReport ro = splitting_calibration_test(odd, 0.05, opt, rng2);
    CHECK(ro.n == 121);
    CHECK(ro.split.dropped == 1);
    CHECK(ro.split.split_at == 60);
    CHECK(ro.critical_value == doctest::Approx(1.0).epsilon(1e-12));

    CalibrationSample small = constant_prediction_sample(3, 0.5, true);
    Rng rng3 = make_rng(421, 3);
    CHECK_THROWS_AS(splitting_calibration_test(small, 0.05, opt, rng3),
                    InvalidArgumentError);
}

TEST_CASE("splitting test: balanced labels cancel the moment screens exactly") {
    CalibrationSample s = constant_prediction_sample(8, 0.5, true);
    SplitOptions opt;
    Rng rng = make_rng(423, 0);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    REQUIRE(r.split.classes.size() == 2);
    for (const auto& sc : r.split.classes) {
        CHECK(sc.t1 == 0.0);
        CHECK(sc.t2 == 0.0);
        CHECK_FALSE(sc.t1_fire);
        CHECK_FALSE(sc.t2_fire);
    }
    CHECK(r.statistic == 0.0);
}

TEST_CASE("splitting test: a gross first-moment violation fires the screen") {
    CalibrationSample s = constant_prediction_sample(1000, 0.5, false); // y = 0 always
    SplitOptions opt;
    opt.num_perms = 119;
    Rng rng = make_rng(425, 0);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    REQUIRE(r.split.classes.size() == 2);
    CHECK(r.split.classes[0].t1 == 0.5);
    CHECK(r.split.classes[1].t1 == -0.5);
    CHECK(r.split.classes[0].t1_fire); // 0.5 >= sqrt(6/50)
    CHECK(r.split.classes[1].t1_fire);
    CHECK(r.statistic == 0.5);
    CHECK(r.reject);
    CHECK(has_warning(r, "class 2: two-sample branch skipped")); // no real label 1
}

TEST_CASE("splitting test: vertex predictions skip the impossible class") {
    CalibrationSample s;
    s.K = 2;
    double z[2] = {1.0, 0.0};
    for (int i = 0; i < 12; ++i) s.push_row(z, 0);
    SplitOptions opt;
    Rng rng = make_rng(427, 0);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    for (std::uint32_t v : r.split.ytilde) CHECK(v == 0);
    REQUIRE(r.split.classes.size() == 2);
    CHECK_FALSE(r.split.classes[0].ts_skipped);
    CHECK(r.split.classes[0].v_size == 6);
    CHECK(r.split.classes[0].w_size == 6);
    CHECK(r.split.classes[0].ts_statistic == 0.0); // identical point sets
    CHECK(r.split.classes[1].ts_skipped);
    CHECK(has_warning(r, "class 2: two-sample branch skipped"));
    CHECK_FALSE(r.reject);
}

TEST_CASE("splitting test audit trace matches a direct recount") {
    SyntheticModel alt = oscillating_model(4, 0.4, 2.0);
    Rng gen = make_rng(429, 0);
    CalibrationSample s = sample(alt, 100, gen);
    SplitOptions opt;
    opt.num_perms = 119;
    Rng rng = make_rng(429, 1);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    REQUIRE(r.split.split_at == 50);
    REQUIRE(r.split.ytilde.size() == 50);
    for (std::uint32_t k = 0; k < s.K; ++k) {
        std::size_t v = 0, w = 0;
        for (std::size_t i = 0; i < 50; ++i) v += s.y[i] == k;
        for (std::uint32_t lab : r.split.ytilde) w += lab == k;
        CHECK(r.split.classes[k].v_size == v);
        CHECK(r.split.classes[k].w_size == w);
    }
    for (std::uint32_t lab : r.split.ytilde) CHECK(lab < s.K);
}

TEST_CASE("per-class split statistics agree with the full test's trace") {
    SyntheticModel alt = oscillating_model(4, 0.4, 2.0);
    Rng gen = make_rng(431, 0);
    CalibrationSample s = sample(alt, 140, gen);
    Rng r1 = make_rng(431, 1);
    std::vector<double> stats =
        split_class_statistics(s, 1.0, TsChoice::Permutation, r1);
    SplitOptions opt;
    opt.smoothness = 1.0;
    opt.num_perms = 119;
    Rng r2 = make_rng(431, 1);
    TestReport rep = splitting_calibration_test(s, 0.05, opt, r2);
    REQUIRE(stats.size() == s.K);
    for (std::uint32_t k = 0; k < s.K; ++k) {
        if (rep.split.classes[k].ts_skipped) {
            CHECK(std::isnan(stats[k]));
        } else {
            CHECK(stats[k] == rep.split.classes[k].ts_statistic);
        }
    }
}

TEST_CASE("precomputed chi-squared calibration is validated and applied") {
    SyntheticModel p0 = calibrated_uniform_model(2);
    // per-class level is alpha/(3K) = 1/120, so >= 119 sims are required for
    // a finite quantile; 240 leaves headroom
    SplitChi2Calibration cal = calibrate_split_chi2(p0, 120, 0.05, 1.0, 240, 433);
    CHECK(cal.n == 120);
    REQUIRE(cal.critical.size() == 2);
    for (double c : cal.critical) {
        CHECK(std::isfinite(c));
        CHECK(c >= 0.0);
    }

    Rng gen = make_rng(433, 1);
    CalibrationSample s = sample(p0, 121, gen); // odd: drops to 120 = cal.n
    SplitOptions opt;
    opt.ts = TsChoice::Chi2MC;
    opt.chi2_calibration = &cal;
    Rng rng = make_rng(433, 2);
    TestReport r = splitting_calibration_test(s, 0.05, opt, rng);
    CHECK(r.source == "mc");
    for (std::uint32_t k = 0; k < 2; ++k)
        if (!r.split.classes[k].ts_skipped)
            CHECK(r.split.classes[k].ts_critical == cal.critical[k]);

    SplitOptions missing;
    missing.ts = TsChoice::Chi2MC;
    Rng rng2 = make_rng(433, 3);
    CHECK_THROWS_AS(splitting_calibration_test(s, 0.05, missing, rng2),
                    InvalidArgumentError);

    SplitChi2Calibration wrong_k = cal;
    wrong_k.critical.push_back(1.0);
    SplitOptions badk;
    badk.ts = TsChoice::Chi2MC;
    badk.chi2_calibration = &wrong_k;
    CHECK_THROWS_AS(splitting_calibration_test(s, 0.05, badk, rng2),
                    InvalidArgumentError);

    SplitChi2Calibration wrong_n = cal;
    wrong_n.n = 100;
    SplitOptions badn;
    badn.ts = TsChoice::Chi2MC;
    badn.chi2_calibration = &wrong_n;
    CHECK_THROWS_AS(splitting_calibration_test(s, 0.05, badn, rng2),
                    InvalidArgumentError);

    CHECK_THROWS_AS(calibrate_split_chi2(p0, 3, 0.05, 1.0, 10, 1), InvalidArgumentError);
    CHECK_THROWS_AS(calibrate_split_chi2(p0, 100, 0.05, 1.0, 0, 1), InvalidArgumentError);
}

TEST_CASE("splitting test keeps level under the calibrated null") {
    SyntheticModel p0 = calibrated_uniform_model(2);
    const int trials = 400;
    int rejects = 0;
    CalibrationSample s;
    SplitOptions opt;
    opt.num_perms = 119;
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(437, static_cast<std::uint64_t>(t));
        sample(p0, 400, rng, s);
        rejects += splitting_calibration_test(s, 0.05, opt, rng).reject;
    }
    const double rate = static_cast<double>(rejects) / trials;
    CHECK(rate <= 0.05 + 2 * std::sqrt(0.05 * 0.95 / trials));
}

TEST_CASE("cross-fit averaging halves the variance when the halves share predictions") {
    // With the second half holding a row-for-row copy of the first half's
    // predictions, the two fold statistics are iid given the predictions, so
    // averaging them halves the variance exactly. (With iid predictions the
    // fold statistics correlate through their prediction-dependent means and
    // the reduction is genuinely smaller; see the next case.)
    SyntheticModel p0 = calibrated_uniform_model(2);
    Rng zgen = make_rng(439, 0);
    CalibrationSample base = sample(p0, 200, zgen);
    const int trials = 4000;
    std::vector<double> single, averaged;
    single.reserve(trials);
    averaged.reserve(trials);
    CalibrationSample t;
    for (int tr = 0; tr < trials; ++tr) {
        Rng lab = make_rng(439, 1 + static_cast<std::uint64_t>(tr));
        t = CalibrationSample{};
        t.K = 2;
        for (std::size_t i = 0; i < 400; ++i) {
            const double* z = base.row(i % 200);
            const std::uint32_t y = uniform01(lab) < z[0] ? 0u : 1u;
            t.push_row(z, y);
        }
        Rng r1 = make_rng(441, static_cast<std::uint64_t>(tr));
        std::vector<double> a = split_class_statistics(t, 1.0, TsChoice::Permutation, r1);
        Rng r2 = make_rng(443, static_cast<std::uint64_t>(tr));
        std::vector<double> b =
            cross_fit_class_statistics(t, 1.0, TsChoice::Permutation, r2);
        if (!std::isnan(a[0]) && !std::isnan(b[0])) {
            single.push_back(a[0]);
            averaged.push_back(b[0]);
        }
    }
    REQUIRE(single.size() > 3900);
    const double ratio = sample_variance(averaged) / sample_variance(single);
    CHECK(ratio >= 0.4);
    CHECK(ratio <= 0.6);
}

TEST_CASE("cross-fit averaging reduces the variance under iid predictions") {
    // Here the fold statistics share the prediction draw, so their means
    // co-move and the variance ratio sits strictly between 1/2 and 1.
    SyntheticModel p0 = calibrated_uniform_model(2);
    const int trials = 1500;
    std::vector<double> single, averaged;
    single.reserve(trials);
    averaged.reserve(trials);
    CalibrationSample s;
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(451, static_cast<std::uint64_t>(t));
        sample(p0, 400, rng, s);
        Rng r1 = make_rng(453, static_cast<std::uint64_t>(t));
        std::vector<double> a = split_class_statistics(s, 1.0, TsChoice::Permutation, r1);
        Rng r2 = make_rng(455, static_cast<std::uint64_t>(t));
        std::vector<double> b =
            cross_fit_class_statistics(s, 1.0, TsChoice::Permutation, r2);
        if (!std::isnan(a[0]) && !std::isnan(b[0])) {
            single.push_back(a[0]);
            averaged.push_back(b[0]);
        }
    }
    REQUIRE(single.size() > 1400);
    const double ratio = sample_variance(averaged) / sample_variance(single);
    CHECK(ratio >= 0.45);
    CHECK(ratio <= 0.9);
}

TEST_CASE("cross-fit statistics vanish when every prediction is the same point") {
    CalibrationSample s = constant_prediction_sample(40, 0.6, true);
    for (TsChoice ts : {TsChoice::Permutation, TsChoice::Chi2MC}) {
        Rng r1 = make_rng(445, static_cast<std::uint64_t>(ts == TsChoice::Chi2MC));
        std::vector<double> a = split_class_statistics(s, 1.0, ts, r1);
        Rng r2 = make_rng(447, static_cast<std::uint64_t>(ts == TsChoice::Chi2MC));
        std::vector<double> b = cross_fit_class_statistics(s, 1.0, ts, r2);
        REQUIRE(a.size() == 2);
        REQUIRE(b.size() == 2);
        for (double v : a) CHECK(v == 0.0);
        for (double v : b) CHECK(v == 0.0);
    }
}

TEST_CASE("cross-fit splitting test: determinism, sources, and moment screen") {
    SyntheticModel alt = oscillating_model(4, 0.4, 2.0);
    Rng gen = make_rng(449, 0);
    CalibrationSample s = sample(alt, 60, gen);
    CrossFitOptions opt;
    opt.num_sims = 40;
    Rng r1 = make_rng(449, 1);
    TestReport a = cross_fit_splitting_test(s, 0.05, opt, r1);
    CHECK(a.method == "crossfit");
    CHECK(a.source == "consistency");
    Rng r2 = make_rng(449, 1);
    TestReport b = cross_fit_splitting_test(s, 0.05, opt, r2);
    CHECK(a.reject == b.reject);
    CHECK(a.statistic == b.statistic);
    REQUIRE(a.split.classes.size() == b.split.classes.size());
    for (std::size_t k = 0; k < a.split.classes.size(); ++k) {
        const auto& x = a.split.classes[k];
        const auto& y = b.split.classes[k];
        CHECK(((x.ts_statistic == y.ts_statistic) ||
               (std::isnan(x.ts_statistic) && std::isnan(y.ts_statistic))));
        CHECK(x.t1 == y.t1);
    }

    SyntheticModel p0 = calibrated_uniform_model(2);
    CrossFitOptions oracle;
    oracle.num_sims = 40;
    oracle.null_model = &p0;
    Rng r3 = make_rng(449, 2);
    TestReport c = cross_fit_splitting_test(s, 0.05, oracle, r3);
    CHECK(c.source == "oracle");

    SyntheticModel p3 = calibrated_uniform_model(3);
    CrossFitOptions badk;
    badk.null_model = &p3;
    Rng r4 = make_rng(449, 3);
    CHECK_THROWS_AS(cross_fit_splitting_test(s, 0.05, badk, r4), InvalidArgumentError);

    // |t1| is exactly 0.5 per class; the screen threshold sqrt(3K/(alpha n))
    // is ~0.346 at n=1000, so the first-moment screen must fire.
    CalibrationSample off = constant_prediction_sample(1000, 0.5, false);
    CrossFitOptions screen;
    screen.num_sims = 30;
    Rng r5 = make_rng(449, 4);
    TestReport d = cross_fit_splitting_test(off, 0.05, screen, r5);
    CHECK(d.reject);
    CHECK(d.split.classes[0].t1_fire);
    CHECK(d.statistic == 0.5);
}

} // TEST_SUITE
