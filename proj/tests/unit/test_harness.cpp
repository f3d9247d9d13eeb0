#include <doctest.h>

#include "tcal/binning.hpp"
#include "tcal/common.hpp"
#include "tcal/estimators.hpp"
#include "tcal/harness.hpp"
#include "tcal/resampling.hpp"
#include "tcal/sample.hpp"
#include "tcal/synthetic.hpp"
#include "tcal/tests.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

using namespace tcal;

namespace {

// Mirrors the experiment driver's per-trial stream layout so the reported
// type II errors can be re-derived from scratch.
double replay_type2(const SyntheticModel& alt, std::size_t n, const Partition& part,
                    double cv, int trials, std::uint64_t master) {
    CalibrationSample buf;
    int rejected = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rr = make_rng(master, static_cast<std::uint64_t>(t));
        sample(alt, n, rr, buf);
        rejected += plugin_stats(buf, part).debiased >= cv;
    }
    return 1.0 - static_cast<double>(rejected) / static_cast<double>(trials);
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("alternative factory enforces family constraints") {
    SyntheticModel cal = make_alternative(ModelFamily::Calibrated, 3, 1, 0.5, 0.0);
    CHECK(cal.family == ModelFamily::Calibrated);
    CHECK(cal.K == 3);
    SyntheticModel osc = make_alternative(ModelFamily::Oscillating, 2, 8, 0.4, 1.0);
    CHECK(osc.family == ModelFamily::Oscillating);
    CHECK_THROWS_AS(make_alternative(ModelFamily::Example1, 3, 8, 0.4, 1.0),
                    InvalidArgumentError);
    CHECK_THROWS_AS(make_alternative(ModelFamily::Oscillating, 4, 8, 0.4, 1.0),
                    InvalidArgumentError);
    SyntheticModel mc = make_alternative(ModelFamily::MulticlassHard, 3, 2, 0.5, 1.0);
    CHECK(mc.K == 3);
}

TEST_CASE("smallest constructible alternative scale") {
    // amplitude rho m^{-s} ||zeta||_inf must stay within 1/4
    CHECK(min_valid_alt_scale(ModelFamily::Oscillating, 2, 0.5, 50.0) == 14);
    CHECK_THROWS_AS(oscillating_model(13, 0.5, 50.0), InvalidArgumentError);
    CHECK_NOTHROW(oscillating_model(14, 0.5, 50.0));

    CHECK(min_valid_alt_scale(ModelFamily::Example1, 2, 0.5, 50.0) == 16);
    CHECK_THROWS_AS(example1_model(12, 0.5, 50.0), InvalidArgumentError);
    CHECK_NOTHROW(example1_model(16, 0.5, 50.0));

    CHECK(min_valid_alt_scale(ModelFamily::Oscillating, 2, 0.5, 10.0) == 1);
    CHECK(min_valid_alt_scale(ModelFamily::Example1, 2, 0.5, 10.0) == 4);
    CHECK(min_valid_alt_scale(ModelFamily::Calibrated, 2, 0.5, 10.0) == 1);
    CHECK(min_valid_alt_scale(ModelFamily::MulticlassHard, 3, 0.5, 1.0) == 1);

    CHECK_THROWS_AS(min_valid_alt_scale(ModelFamily::Oscillating, 2, 0.0, 1.0),
                    InvalidArgumentError);
    CHECK_THROWS_AS(min_valid_alt_scale(ModelFamily::Oscillating, 2, 0.5, -1.0),
                    InvalidArgumentError);
}

TEST_CASE("power experiment validates its configuration") {
    PowerConfig cfg;
    cfg.alt_m = {};
    CHECK_THROWS_AS(run_power_experiment(cfg), InvalidArgumentError);
    cfg.alt_m = {8};
    cfg.trials = 0;
    CHECK_THROWS_AS(run_power_experiment(cfg), InvalidArgumentError);
    cfg.trials = 1;
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(run_power_experiment(cfg), InvalidArgumentError);
    cfg.alpha = 0.05;
    cfg.cv_resamples = 0;
    CHECK_THROWS_AS(run_power_experiment(cfg), InvalidArgumentError);
}

TEST_CASE("power curve: row bookkeeping, determinism, and emitted artifacts") {
    PowerConfig cfg;
    cfg.family = ModelFamily::Oscillating;
    cfg.K = 2;
    cfg.s = 0.5;
    cfg.rho = 30.0;
    cfg.alt_m = {32, 16}; // deliberately unsorted
    cfg.stat = StatKind::Debiased;
    cfg.test_m = 0;
    cfg.cv_resamples = 50;
    cfg.n = 150;
    cfg.trials = 1;
    cfg.alpha = 0.05;
    cfg.seed = 5;

    PowerCurve a = run_power_experiment(cfg);
    CHECK(a.test_m == optimal_bins(150, 0.5, 2));
    REQUIRE(a.rows.size() == 2);

    // rows come back sorted by analytic calibration error, ascending
    CHECK(a.rows[0].ece <= a.rows[1].ece);
    CHECK(a.rows[0].m == 32); // the finer alternative has the smaller error
    CHECK(a.rows[1].m == 16);
    for (const auto& row : a.rows) {
        SyntheticModel alt =
            make_alternative(cfg.family, cfg.K, row.m, cfg.s, cfg.rho);
        CHECK(row.ece == alt.analytic_lp_ece(2));
        CHECK((row.type2 == 0.0 || row.type2 == 1.0)); // a single trial
        CHECK(row.se == 0.0);
    }

    // the critical value is the advertised quantile of fresh null replicates
    SyntheticModel p0 = calibrated_uniform_model(2);
    std::vector<double> reps =
        oracle_replicates(p0, cfg.n, {{a.test_m, StatKind::Debiased}},
                          cfg.cv_resamples, derive_seed(cfg.seed, 0));
    CHECK(a.critical_value == order_stat_threshold(reps, cfg.alpha).threshold);

    // byte-identical artifacts on a rerun
    PowerCurve b = run_power_experiment(cfg);
    std::ostringstream csv_a, csv_b, man_a, man_b;
    write_power_csv(a, csv_a);
    write_power_csv(b, csv_b);
    write_power_manifest(a, man_a);
    write_power_manifest(b, man_b);
    const std::string csv = csv_a.str();
    CHECK(csv == csv_b.str());
    CHECK(man_a.str() == man_b.str());
    CHECK(csv.rfind("ece,type2,se\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    nlohmann::json man = nlohmann::json::parse(man_a.str());
    CHECK(man["experiment"] == "power");
    CHECK(man["config"]["family"] == "oscillating");
    CHECK(man["config"]["seed"] == 5);
    CHECK(man["test_m"] == a.test_m);
    CHECK(man["rows"].size() == 2);

    // a fixed binning override is honored
    PowerConfig fixed = cfg;
    fixed.test_m = 32;
    CHECK(run_power_experiment(fixed).test_m == 32);
}

TEST_CASE("power curve: type II error decreases as the calibration error grows") {
    PowerConfig cfg;
    cfg.family = ModelFamily::Oscillating;
    cfg.K = 2;
    cfg.s = 0.5;
    cfg.rho = 50.0;
    cfg.alt_m = {14, 25, 60};
    cfg.stat = StatKind::Debiased;
    cfg.test_m = 64; // resolves the first two scales, aliases the third
    cfg.cv_resamples = 400;
    cfg.n = 4000;
    cfg.trials = 300;
    cfg.alpha = 0.05;
    cfg.seed = 11;

    PowerCurve curve = run_power_experiment(cfg);
    REQUIRE(curve.rows.size() == 3);
    for (std::size_t i = 0; i + 1 < curve.rows.size(); ++i) {
        const auto& weak = curve.rows[i];
        const auto& strong = curve.rows[i + 1];
        CHECK(weak.ece <= strong.ece);
        CHECK(strong.type2 <= weak.type2 + 2 * (weak.se + strong.se));
    }
    // the extremes are clearly separated, not just weakly ordered
    CHECK(curve.rows.front().type2 >= 0.5);
    CHECK(curve.rows.back().type2 <= 0.25);

    // reported uncertainty is the binomial standard error
    for (const auto& row : curve.rows)
        CHECK(row.se == doctest::Approx(std::sqrt(row.type2 * (1.0 - row.type2) /
                                                  cfg.trials))
                            .epsilon(1e-14));
}

TEST_CASE("rate experiment validates its configuration") {
    RateConfig cfg;
    cfg.n_grid = {};
    CHECK_THROWS_AS(run_detection_rate_experiment(cfg), InvalidArgumentError);
    cfg.n_grid = {500};
    cfg.trials = 0;
    CHECK_THROWS_AS(run_detection_rate_experiment(cfg), InvalidArgumentError);
    cfg.trials = 10;
    cfg.type2_target = 1.0;
    CHECK_THROWS_AS(run_detection_rate_experiment(cfg), InvalidArgumentError);
    cfg.type2_target = 0.05;
    cfg.m_min = 8;
    cfg.m_max = 8;
    CHECK_THROWS_AS(run_detection_rate_experiment(cfg), InvalidArgumentError);
}

TEST_CASE("rate experiment censors sample sizes that detect nothing") {
    RateConfig cfg;
    cfg.family = ModelFamily::Oscillating;
    cfg.K = 2;
    cfg.s = 0.5;
    cfg.rho = 12.0; // far too faint for these sample sizes
    cfg.n_grid = {1500, 3000};
    cfg.trials = 40;
    cfg.alpha = 0.05;
    cfg.type2_target = 0.05;
    cfg.cv_resamples = 150;
    cfg.seed = 21;

    RateResult res = run_detection_rate_experiment(cfg);
    REQUIRE(res.points.size() == 2);
    for (const auto& pt : res.points) {
        CHECK(pt.censored);
        CHECK(std::isnan(pt.eps));
    }
    CHECK(std::isnan(res.slope));

    std::ostringstream csv, man;
    write_rate_csv(res, csv);
    write_rate_manifest(res, man);
    CHECK(csv.str().rfind("n,m,eps,censored\n", 0) == 0);
    CHECK(csv.str().find(",1\n") != std::string::npos);
    nlohmann::json j = nlohmann::json::parse(man.str());
    CHECK(j["slope"].is_null());
    CHECK(j["points"][0]["eps"].is_null());
    CHECK(j["points"][0]["censored"] == true);
}

TEST_CASE("rate experiment: detection boundary, separation, and slope") {
    RateConfig cfg;
    cfg.family = ModelFamily::Oscillating;
    cfg.K = 2;
    cfg.s = 0.5;
    cfg.rho = 50.0;
    cfg.n_grid = {8000, 16000};
    cfg.trials = 100;
    cfg.alpha = 0.05;
    cfg.type2_target = 0.05;
    cfg.cv_resamples = 300;
    cfg.seed = 23;

    RateResult res = run_detection_rate_experiment(cfg);
    REQUIRE(res.points.size() == 2);
    for (const auto& pt : res.points) {
        REQUIRE_FALSE(pt.censored);
        CHECK(pt.test_m == optimal_bins(pt.n, cfg.s, cfg.K));
        CHECK(pt.m_detect >= 14); // the smallest constructible scale
        CHECK(pt.eps ==
              doctest::Approx(cfg.rho * zeta_norm_lp(2.0) *
                              std::pow(static_cast<double>(pt.m_detect), -cfg.s))
                  .epsilon(1e-15));
    }
    CHECK(res.points[1].m_detect > res.points[0].m_detect);

    // with two points the least-squares slope is the secant
    const double secant =
        (std::log(res.points[1].eps) - std::log(res.points[0].eps)) /
        (std::log(16000.0) - std::log(8000.0));
    CHECK(res.slope == doctest::Approx(secant).epsilon(1e-12));
    CHECK(res.slope < -0.1);
    CHECK(res.slope > -0.7);

    // re-derive the boundary at the first sample size from the documented
    // stream layout: m_detect is detected, m_detect + 1 is not
    const RatePoint& pt = res.points[0];
    const std::uint64_t master_n = derive_seed(cfg.seed, 0);
    SyntheticModel p0 = calibrated_uniform_model(2);
    std::vector<double> reps =
        oracle_replicates(p0, pt.n, {{pt.test_m, StatKind::Debiased}},
                          cfg.cv_resamples, derive_seed(master_n, 0));
    const double cv = order_stat_threshold(reps, cfg.alpha).threshold;
    const Partition part = build_partition(pt.test_m, cfg.K);
    const SyntheticModel at =
        make_alternative(cfg.family, cfg.K, pt.m_detect, cfg.s, cfg.rho);
    const SyntheticModel above =
        make_alternative(cfg.family, cfg.K, pt.m_detect + 1, cfg.s, cfg.rho);
    CHECK(replay_type2(at, pt.n, part, cv, cfg.trials,
                       derive_seed(master_n, pt.m_detect)) < cfg.type2_target);
    CHECK(replay_type2(above, pt.n, part, cv, cfg.trials,
                       derive_seed(master_n, pt.m_detect + 1)) >= cfg.type2_target);
}

} // TEST_SUITE
