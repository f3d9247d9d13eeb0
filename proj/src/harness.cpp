#include "tcal/harness.hpp"

#include "tcal/binning.hpp"
#include "tcal/io.hpp"
#include "tcal/tests.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace tcal {

namespace {

double pick_stat(const PluginStats& st, StatKind kind) {
    switch (kind) {
        case StatKind::Biased: return st.biased;
        case StatKind::Debiased: return st.debiased;
        case StatKind::L1: return st.l1;
    }
    return st.debiased;
}

const char* stat_name(StatKind kind) {
    switch (kind) {
        case StatKind::Biased: return "biased";
        case StatKind::Debiased: return "debiased";
        case StatKind::L1: return "l1";
    }
    return "?";
}

const char* family_label(ModelFamily f) {
    switch (f) {
        case ModelFamily::Calibrated: return "calibrated";
        case ModelFamily::Example1: return "example1";
        case ModelFamily::Oscillating: return "oscillating";
        case ModelFamily::MulticlassHard: return "multiclass";
    }
    return "?";
}

// Rejection rate of "statistic >= cv" at binning `part` over `trials`
// derived-seed samples of `model`; returns the acceptance rate (type II when
// the model is an alternative).
double acceptance_rate(const SyntheticModel& model, std::size_t n,
                       const Partition& part, StatKind kind, double cv,
                       int trials, std::uint64_t master) {
    std::vector<std::uint8_t> rej(static_cast<std::size_t>(trials), 0);
    const std::size_t chunks = std::max<std::size_t>(
        1, std::min<std::size_t>(max_threads(), static_cast<std::size_t>(trials)));
    parallel_for(chunks, [&](std::size_t chunk) {
        CalibrationSample buf;
        const auto lo = static_cast<std::size_t>(trials) * chunk / chunks;
        const auto hi = static_cast<std::size_t>(trials) * (chunk + 1) / chunks;
        for (std::size_t t = lo; t < hi; ++t) {
            Rng rr = make_rng(master, t);
            sample(model, n, rr, buf);
            const double st = pick_stat(plugin_stats(buf, part), kind);
            rej[t] = st >= cv ? 1 : 0;
        }
    });
    std::size_t rejected = 0;
    for (std::uint8_t r : rej) rejected += r;
    return 1.0 - static_cast<double>(rejected) / static_cast<double>(trials);
}

} // namespace

SyntheticModel make_alternative(ModelFamily family, std::uint32_t K,
                                std::uint32_t m, double s, double rho) {
    switch (family) {
        case ModelFamily::Calibrated: return calibrated_uniform_model(K);
        case ModelFamily::Example1:
            if (K != 2) throw InvalidArgumentError("example1 family is binary");
            return example1_model(m, s, rho);
        case ModelFamily::Oscillating:
            if (K != 2) throw InvalidArgumentError("oscillating family is binary");
            return oscillating_model(m, s, rho);
        case ModelFamily::MulticlassHard:
            return multiclass_hard_alternative(m, s, K, rho);
    }
    throw InvalidArgumentError("unknown model family");
}

std::uint32_t min_valid_alt_scale(ModelFamily family, std::uint32_t K, double s,
                                  double rho) {
    if (!(s > 0.0)) throw InvalidArgumentError("min_valid_alt_scale: s must be positive");
    if (rho < 0.0) throw InvalidArgumentError("min_valid_alt_scale: rho must be >= 0");
    if (family == ModelFamily::Calibrated) return 1;
    std::uint32_t m = 1;
    if (family != ModelFamily::MulticlassHard) {
        // bump amplitude rho * m^{-s} * ||zeta||_inf must stay within 1/4
        const double need = rho * zeta_norm_inf() / 0.25;
        if (need > 1.0)
            m = static_cast<std::uint32_t>(std::ceil(std::pow(need, 1.0 / s) - 1e-9));
        if (family == ModelFamily::Example1) {
            m = ((m + 3) / 4) * 4; // multiples of four only
            if (m < 4) m = 4;
        }
    }
    // constructing validates; multiclass feasibility does not depend on m
    make_alternative(family, K, m, s, rho);
    return m;
}

PowerCurve run_power_experiment(const PowerConfig& cfg) {
    if (cfg.trials < 1) throw InvalidArgumentError("power experiment: trials must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw InvalidArgumentError("power experiment: alpha must be in (0,1)");
    if (cfg.alt_m.empty())
        throw InvalidArgumentError("power experiment: empty alternative grid");
    if (cfg.n < 1) throw InvalidArgumentError("power experiment: n must be >= 1");
    if (cfg.cv_resamples < 1)
        throw InvalidArgumentError("power experiment: cv_resamples must be >= 1");

    PowerCurve out;
    out.config = cfg;
    out.test_m = cfg.test_m != 0 ? cfg.test_m : optimal_bins(cfg.n, cfg.s, cfg.K);

    const SyntheticModel null_model = calibrated_uniform_model(cfg.K);
    std::vector<double> reps =
        oracle_replicates(null_model, cfg.n, {{out.test_m, cfg.stat}},
                          cfg.cv_resamples, derive_seed(cfg.seed, 0));
    out.critical_value = order_stat_threshold(reps, cfg.alpha).threshold;

    const Partition part = build_partition(out.test_m, cfg.K);
    for (std::size_t gi = 0; gi < cfg.alt_m.size(); ++gi) {
        const SyntheticModel alt =
            make_alternative(cfg.family, cfg.K, cfg.alt_m[gi], cfg.s, cfg.rho);
        const double type2 =
            acceptance_rate(alt, cfg.n, part, cfg.stat, out.critical_value,
                            cfg.trials, derive_seed(cfg.seed, 1 + gi));
        PowerRow row;
        row.m = cfg.alt_m[gi];
        row.ece = alt.analytic_lp_ece(2);
        row.type2 = type2;
        row.se = std::sqrt(type2 * (1.0 - type2) / static_cast<double>(cfg.trials));
        out.rows.push_back(row);
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const PowerRow& a, const PowerRow& b) {
        if (a.ece != b.ece) return a.ece < b.ece;
        return a.m < b.m;
    });
    return out;
}

void write_power_csv(const PowerCurve& curve, std::ostream& os) {
    os << "ece,type2,se\n";
    for (const auto& r : curve.rows)
        os << format_double(r.ece) << "," << format_double(r.type2) << ","
           << format_double(r.se) << "\n";
}

void write_power_manifest(const PowerCurve& curve, std::ostream& os) {
    nlohmann::ordered_json j;
    const auto& c = curve.config;
    j["experiment"] = "power";
    j["config"] = {
        {"family", family_label(c.family)}, {"K", c.K},       {"s", c.s},
        {"rho", c.rho},                     {"alt_m", c.alt_m},
        {"stat", stat_name(c.stat)},        {"test_m", c.test_m},
        {"cv_resamples", c.cv_resamples},   {"n", c.n},
        {"trials", c.trials},               {"alpha", c.alpha},
        {"seed", c.seed},
    };
    j["test_m"] = curve.test_m;
    j["critical_value"] = curve.critical_value;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : curve.rows)
        rows.push_back({{"m", r.m}, {"ece", r.ece}, {"type2", r.type2}, {"se", r.se}});
    j["rows"] = rows;
    os << j.dump(2) << "\n";
}

RateResult run_detection_rate_experiment(const RateConfig& cfg) {
    if (cfg.n_grid.empty())
        throw InvalidArgumentError("rate experiment: empty n grid");
    if (cfg.trials < 1) throw InvalidArgumentError("rate experiment: trials must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw InvalidArgumentError("rate experiment: alpha must be in (0,1)");
    if (!(cfg.type2_target > 0.0 && cfg.type2_target < 1.0))
        throw InvalidArgumentError("rate experiment: type2 target must be in (0,1)");
    if (cfg.m_min < 1 || cfg.m_max <= cfg.m_min)
        throw InvalidArgumentError("rate experiment: need 1 <= m_min < m_max");

    RateResult out;
    out.config = cfg;
    const SyntheticModel null_model = calibrated_uniform_model(cfg.K);
    const std::uint32_t m_floor =
        std::max(cfg.m_min, min_valid_alt_scale(cfg.family, cfg.K, cfg.s, cfg.rho));

    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        const std::size_t n = cfg.n_grid[ni];
        const std::uint64_t master_n = derive_seed(cfg.seed, ni);
        RatePoint pt;
        pt.n = n;
        pt.test_m = optimal_bins(n, cfg.s, cfg.K);

        std::vector<double> reps =
            oracle_replicates(null_model, n, {{pt.test_m, StatKind::Debiased}},
                              cfg.cv_resamples, derive_seed(master_n, 0));
        const double cv = order_stat_threshold(reps, cfg.alpha).threshold;
        const Partition part = build_partition(pt.test_m, cfg.K);

        auto type2_at = [&](std::uint32_t m) {
            const SyntheticModel alt =
                make_alternative(cfg.family, cfg.K, m, cfg.s, cfg.rho);
            return acceptance_rate(alt, n, part, StatKind::Debiased, cv, cfg.trials,
                                   derive_seed(master_n, m));
        };

        // ascend a geometric grid until the target is crossed, then bisect
        // for the largest scale still detected
        std::uint32_t lo = m_floor;
        if (type2_at(lo) >= cfg.type2_target) {
            pt.censored = true; // nothing in range is detectable
            pt.m_detect = lo;
            pt.eps = std::numeric_limits<double>::quiet_NaN();
        } else {
            std::uint32_t hi = 0;
            for (;;) {
                std::uint32_t next = std::max(
                    lo + 1, static_cast<std::uint32_t>(std::lround(lo * 1.25)));
                if (next > cfg.m_max) break;
                if (type2_at(next) >= cfg.type2_target) {
                    hi = next;
                    break;
                }
                lo = next;
            }
            if (hi == 0) {
                pt.censored = true; // still detectable at the top of the range
                pt.m_detect = lo;
                pt.eps = std::numeric_limits<double>::quiet_NaN();
            } else {
                while (hi - lo > 1) {
                    const std::uint32_t mid = lo + (hi - lo) / 2;
                    if (type2_at(mid) < cfg.type2_target) lo = mid;
                    else hi = mid;
                }
                pt.m_detect = lo;
                pt.eps = cfg.rho * zeta_norm_lp(2.0) *
                         std::pow(static_cast<double>(lo), -cfg.s);
            }
        }
        out.points.push_back(pt);
    }

    // least-squares slope of log(eps) on log(n), uncensored points only
    std::vector<double> xs, ys;
    for (const auto& pt : out.points)
        if (!pt.censored) {
            xs.push_back(std::log(static_cast<double>(pt.n)));
            ys.push_back(std::log(pt.eps));
        }
    if (xs.size() < 2) {
        out.slope = std::numeric_limits<double>::quiet_NaN();
    } else {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(xs.size());
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        out.slope = sxy / sxx;
    }
    return out;
}

void write_rate_csv(const RateResult& result, std::ostream& os) {
    os << "n,m,eps,censored\n";
    for (const auto& pt : result.points)
        os << pt.n << "," << pt.m_detect << "," << format_double(pt.eps) << ","
           << (pt.censored ? 1 : 0) << "\n";
}

void write_rate_manifest(const RateResult& result, std::ostream& os) {
    nlohmann::ordered_json j;
    const auto& c = result.config;
    j["experiment"] = "rate";
    j["config"] = {
        {"family", family_label(c.family)}, {"K", c.K},           {"s", c.s},
        {"rho", c.rho},                     {"n_grid", c.n_grid},
        {"trials", c.trials},               {"alpha", c.alpha},
        {"type2_target", c.type2_target},   {"cv_resamples", c.cv_resamples},
        {"seed", c.seed},                   {"m_min", c.m_min},
        {"m_max", c.m_max},
    };
    auto pts = nlohmann::ordered_json::array();
    for (const auto& pt : result.points)
        pts.push_back({{"n", pt.n},
                       {"test_m", pt.test_m},
                       {"m_detect", pt.m_detect},
                       {"eps", pt.censored ? nlohmann::ordered_json() : nlohmann::ordered_json(pt.eps)},
                       {"censored", pt.censored}});
    j["points"] = pts;
    j["slope"] = std::isnan(result.slope) ? nlohmann::ordered_json()
                                          : nlohmann::ordered_json(result.slope);
    os << j.dump(2) << "\n";
}

} // namespace tcal
