// tcal: command-line surface for the calibration-testing library.
//
// Subcommands:
//   test   ingest a prediction file and run one calibration test
//   power  Monte-Carlo power curve for a synthetic alternative grid (config file)
//   rate   detection-rate study: largest detectable bump scale per sample size
//
// Exit codes: 0 = ran (whatever the decision), 1 = runtime error (bad data,
// unreadable file), 2 = usage error (bad flags or config).
//
// Environment: TCAL_ALPHA overrides the default test level when --alpha (or a
// config value) is absent; TCAL_THREADS likewise for --threads.

#include "tcal/harness.hpp"
#include "tcal/io.hpp"
#include "tcal/tests.hpp"
#include "tcal/two_sample.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using nlohmann::ordered_json;
using namespace tcal;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double parse_env_double(const char* name, double fallback) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return fallback;
    char* end = nullptr;
    const double x = std::strtod(v, &end);
    if (end == v || *end != '\0')
        throw UsageError(std::string(name) + ": cannot parse '" + v + "'");
    return x;
}

int parse_env_int(const char* name, int fallback) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return fallback;
    char* end = nullptr;
    const long x = std::strtol(v, &end, 10);
    if (end == v || *end != '\0')
        throw UsageError(std::string(name) + ": cannot parse '" + v + "'");
    return static_cast<int>(x);
}

CvSource parse_source(const std::string& s) {
    if (s == "analytic") return CvSource::Analytic;
    if (s == "oracle") return CvSource::OracleMC;
    if (s == "consistency") return CvSource::Consistency;
    if (s == "yonly") return CvSource::YOnly;
    throw UsageError("unknown critical-value source '" + s + "'");
}

ModelFamily parse_family(const std::string& s) {
    if (s == "calibrated") return ModelFamily::Calibrated;
    if (s == "example1") return ModelFamily::Example1;
    if (s == "oscillating") return ModelFamily::Oscillating;
    if (s == "multiclass") return ModelFamily::MulticlassHard;
    throw UsageError("unknown model family '" + s + "'");
}

StatKind parse_stat(const std::string& s) {
    if (s == "biased") return StatKind::Biased;
    if (s == "debiased") return StatKind::Debiased;
    if (s == "l1") return StatKind::L1;
    throw UsageError("unknown statistic '" + s + "'");
}

ordered_json report_to_json(const TestReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["statistic"] = r.statistic;
    j["critical_value"] = r.critical_value;
    j["alpha"] = r.alpha;
    j["reject"] = r.reject;
    if (r.bins.size() == 1) j["m_or_grid"] = r.bins[0];
    else if (!r.bins.empty()) j["m_or_grid"] = r.bins;
    else j["m_or_grid"] = nullptr;
    j["n"] = r.n;
    j["K"] = r.K;
    j["seed"] = r.seed;
    j["source"] = r.source;
    j["warnings"] = r.warnings;
    if (!std::isnan(r.achieved_level)) j["achieved_level"] = r.achieved_level;
    if (!r.scales.empty()) {
        auto arr = ordered_json::array();
        for (const auto& sc : r.scales)
            arr.push_back({{"m", sc.m},
                           {"statistic", sc.statistic},
                           {"critical_value", sc.critical_value},
                           {"reject", sc.reject}});
        j["scales"] = arr;
        j["first_reject_scale"] = r.first_reject_scale;
    }
    if (!r.split.classes.empty()) {
        ordered_json sp;
        sp["split_at"] = r.split.split_at;
        sp["dropped"] = r.split.dropped;
        sp["randomized_labels"] = r.split.ytilde.size(); // second half only
        auto arr = ordered_json::array();
        for (const auto& c : r.split.classes)
            arr.push_back({{"t1", c.t1},
                           {"t2", c.t2},
                           {"t1_fire", c.t1_fire},
                           {"t2_fire", c.t2_fire},
                           {"ts_fire", c.ts_fire},
                           {"ts_skipped", c.ts_skipped},
                           {"v_size", c.v_size},
                           {"w_size", c.w_size},
                           {"ts_statistic", c.ts_statistic},
                           {"ts_critical", c.ts_critical}});
        sp["classes"] = arr;
        j["split"] = sp;
    }
    return j;
}

// ---------------------------------------------------------------------------

struct TestArgs {
    std::string input;
    std::string format = "auto";
    std::string method = "tcal";
    double alpha = -1.0; // sentinel: flag absent
    std::uint32_t bins = 0;
    bool adaptive = false;
    double smoothness = 1.0;
    std::string source = "consistency";
    bool source_given = false;
    int resamples = -1; // sentinel: per-method default
    std::uint64_t seed = 0;
    bool binarize = false;
    bool renormalize = false;
    int threads = 0;
};

int cmd_test(const TestArgs& a) {
    const double alpha = a.alpha >= 0.0 ? a.alpha : parse_env_double("TCAL_ALPHA", 0.05);
    const int threads = a.threads > 0 ? a.threads : parse_env_int("TCAL_THREADS", 0);
    set_max_threads(threads);

    if (a.method != "tcal") {
        if (a.bins != 0 || a.adaptive)
            throw UsageError("--bins/--adaptive apply to --method tcal only");
        if (a.source_given)
            throw UsageError("--source applies to --method tcal only");
    }
    if (a.method == "tcal" && a.source == "oracle")
        throw UsageError("oracle critical values need a known model; "
                         "file input has none");

    IngestOptions iopt;
    iopt.format = a.format == "csv"     ? FileFormat::Csv
                  : a.format == "jsonl" ? FileFormat::Jsonl
                                        : FileFormat::Auto;
    iopt.binarize_top1 = a.binarize;
    iopt.renormalize = a.renormalize;
    CalibrationSample s = ingest_file(a.input, iopt);

    auto binary_input = [&]() {
        if (s.K != 2)
            throw UsageError("--method " + a.method +
                             " needs binary predictions; pass --binarize-top1 "
                             "for multiclass input");
        return to_binary(s);
    };

    TestReport rep;
    Rng rng = make_rng(a.seed, 0);
    if (a.method == "tcal") {
        CriticalValueSpec spec;
        spec.source = parse_source(a.source);
        spec.num_resamples = a.resamples > 0 ? a.resamples : 999;
        spec.seed = a.seed;
        if (a.adaptive) {
            rep = tcal_adaptive(s, alpha, spec);
        } else {
            const std::uint32_t m =
                a.bins != 0 ? a.bins
                            : optimal_bins(s.n, a.smoothness,
                                           static_cast<std::uint32_t>(s.K));
            rep = tcal_fixed(s, m, alpha, spec);
        }
    } else if (a.method == "split") {
        SplitOptions opt;
        opt.smoothness = a.smoothness;
        opt.num_perms = a.resamples > 0 ? a.resamples : 300;
        rep = splitting_calibration_test(s, alpha, opt, rng);
    } else if (a.method == "crossfit") {
        CrossFitOptions opt;
        opt.smoothness = a.smoothness;
        opt.num_sims = a.resamples > 0 ? a.resamples : 1000;
        rep = cross_fit_splitting_test(s, alpha, opt, rng);
    } else if (a.method == "binomial") {
        const BinarySample b = binary_input();
        std::map<double, std::pair<std::uint64_t, std::uint64_t>> groups;
        for (std::size_t i = 0; i < b.n(); ++i) {
            auto& g = groups[b.z[i]];
            ++g.first;
            if (b.y[i]) ++g.second;
        }
        std::vector<DiscreteGroup> gs;
        gs.reserve(groups.size());
        for (const auto& [z, cnt] : groups) gs.push_back({z, cnt.first, cnt.second});
        rep = discrete_binomial_test(gs, alpha);
    } else if (a.method == "score") {
        const BinarySample b = binary_input();
        rep = logistic_score_test(b, alpha, a.resamples > 0 ? a.resamples : 999, rng);
    } else {
        throw UsageError("unknown method '" + a.method + "'");
    }

    rep.seed = a.seed; // echo the user-facing seed, not internal stream ids
    std::cout << report_to_json(rep).dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& what) {
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw UsageError(what + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T config_get(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError("config key '" + key + "' has the wrong type");
    }
}

int cmd_power(const std::string& config_path, const std::string& out_prefix,
              int threads) {
    set_max_threads(threads > 0 ? threads : parse_env_int("TCAL_THREADS", 0));
    const nlohmann::json cj = load_config_file(config_path);
    if (!cj.is_object()) throw UsageError(config_path + ": config must be a table");
    reject_unknown_keys(cj,
                        {"family", "K", "s", "rho", "alt_m", "stat", "test_m",
                         "cv_resamples", "n", "trials", "alpha", "seed"},
                        config_path);

    PowerConfig cfg;
    cfg.family = parse_family(config_get<std::string>(cj, "family", "oscillating"));
    cfg.K = config_get<std::uint32_t>(cj, "K", 2);
    cfg.s = config_get<double>(cj, "s", 0.3);
    cfg.rho = config_get<double>(cj, "rho", 50.0);
    cfg.alt_m = config_get<std::vector<std::uint32_t>>(cj, "alt_m", {});
    cfg.stat = parse_stat(config_get<std::string>(cj, "stat", "debiased"));
    cfg.test_m = config_get<std::uint32_t>(cj, "test_m", 0);
    cfg.cv_resamples = config_get<int>(cj, "cv_resamples", 1000);
    cfg.n = config_get<std::size_t>(cj, "n", 10000);
    cfg.trials = config_get<int>(cj, "trials", 1000);
    cfg.alpha = cj.contains("alpha") ? config_get<double>(cj, "alpha", 0.05)
                                     : parse_env_double("TCAL_ALPHA", 0.05);
    cfg.seed = config_get<std::uint64_t>(cj, "seed", 1);
    if (cfg.alt_m.empty())
        throw UsageError(config_path + ": 'alt_m' (alternative scale grid) is required");

    PowerCurve curve;
    try {
        curve = run_power_experiment(cfg);
    } catch (const InvalidArgumentError& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }

    const std::string csv_path = out_prefix + ".csv";
    const std::string json_path = out_prefix + ".json";
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path);
    write_power_csv(curve, csv);
    std::ofstream mf(json_path);
    if (!mf) throw DataError("cannot write " + json_path);
    write_power_manifest(curve, mf);

    std::cout << "power: " << curve.rows.size() << " grid points, test_m=" << curve.test_m
              << ", critical_value=" << format_double(curve.critical_value) << " -> "
              << csv_path << ", " << json_path << "\n";
    return 0;
}

int cmd_rate(const RateConfig& cfg_in, const std::string& out_prefix, int threads) {
    set_max_threads(threads > 0 ? threads : parse_env_int("TCAL_THREADS", 0));
    RateResult result;
    try {
        result = run_detection_rate_experiment(cfg_in);
    } catch (const InvalidArgumentError& e) {
        throw UsageError(std::string("invalid arguments: ") + e.what());
    }
    for (const auto& pt : result.points) {
        std::cout << "n=" << pt.n << " test_m=" << pt.test_m << " m=" << pt.m_detect
                  << " eps=" << format_double(pt.eps)
                  << (pt.censored ? " (censored)" : "") << "\n";
    }
    std::cout << "rate: slope=" << format_double(result.slope) << " over "
              << result.points.size() << " sample sizes\n";
    if (!out_prefix.empty()) {
        const std::string csv_path = out_prefix + ".csv";
        const std::string json_path = out_prefix + ".json";
        std::ofstream csv(csv_path);
        if (!csv) throw DataError("cannot write " + csv_path);
        write_rate_csv(result, csv);
        std::ofstream mf(json_path);
        if (!mf) throw DataError("cannot write " + json_path);
        write_rate_manifest(result, mf);
        std::cout << "wrote " << csv_path << ", " << json_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tcal: hypothesis tests for calibration of probabilistic classifiers"};
    app.require_subcommand(1);

    TestArgs ta;
    CLI::App* test = app.add_subcommand("test", "run a calibration test on a prediction file");
    test->add_option("--input", ta.input, "CSV or JSONL prediction file")->required();
    test->add_option("--format", ta.format, "input format")
        ->check(CLI::IsMember({"auto", "csv", "jsonl"}))
        ->capture_default_str();
    test->add_option("--method", ta.method, "test family")
        ->check(CLI::IsMember({"tcal", "split", "crossfit", "binomial", "score"}))
        ->capture_default_str();
    test->add_option("--alpha", ta.alpha, "test level (default 0.05 or TCAL_ALPHA)");
    auto* bins_opt = test->add_option("--bins", ta.bins, "fixed binning resolution m");
    auto* adaptive_opt =
        test->add_flag("--adaptive", ta.adaptive, "multi-scale test over a dyadic grid");
    bins_opt->excludes(adaptive_opt);
    adaptive_opt->excludes(bins_opt);
    test->add_option("--smoothness", ta.smoothness,
                     "assumed residual smoothness s (picks m when --bins is absent)")
        ->capture_default_str();
    test->add_option("--source", ta.source,
                     "critical-value source for --method tcal")
        ->check(CLI::IsMember({"analytic", "oracle", "consistency", "yonly"}))
        ->capture_default_str();
    test->add_option("--resamples", ta.resamples,
                     "resamples/permutations/simulations for critical values");
    test->add_option("--seed", ta.seed, "master seed")->capture_default_str();
    test->add_flag("--binarize-top1", ta.binarize,
                   "reduce to (top-1 confidence, correctness) before testing");
    test->add_flag("--renormalize", ta.renormalize,
                   "rescale rows whose probabilities do not sum to 1");
    test->add_option("--threads", ta.threads, "worker threads (default: all cores)");

    std::string power_config, power_out = "power";
    int power_threads = 0;
    CLI::App* power = app.add_subcommand("power", "Monte-Carlo power curve (config-driven)");
    power->add_option("--config", power_config, "TOML/JSON experiment config")->required();
    power->add_option("--out", power_out, "output path prefix")->capture_default_str();
    power->add_option("--threads", power_threads, "worker threads");

    RateConfig rc;
    rc.n_grid = {2000, 3500, 6000, 10000, 20000};
    std::string rate_family = "oscillating", rate_out;
    int rate_threads = 0;
    double rate_alpha = -1.0;
    CLI::App* rate = app.add_subcommand("rate", "detection-rate study over sample sizes");
    rate->add_option("--s", rc.s, "residual smoothness")->required();
    rate->add_option("--rho", rc.rho, "residual amplitude")->required();
    rate->add_option("--n-grid", rc.n_grid, "sample sizes")->delimiter(',');
    rate->add_option("--trials", rc.trials, "trials per type-II estimate")
        ->capture_default_str();
    rate->add_option("--alpha", rate_alpha, "test level (default 0.05 or TCAL_ALPHA)");
    rate->add_option("--seed", rc.seed, "master seed")->capture_default_str();
    rate->add_option("--family", rate_family, "alternative family")
        ->check(CLI::IsMember({"example1", "oscillating", "multiclass"}))
        ->capture_default_str();
    rate->add_option("--K", rc.K, "number of classes")->capture_default_str();
    rate->add_option("--cv-resamples", rc.cv_resamples, "oracle replicates per critical value")
        ->capture_default_str();
    rate->add_option("--out", rate_out, "output path prefix (CSV + manifest)");
    rate->add_option("--threads", rate_threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ta.source_given = test->count("--source") > 0;
        if (test->parsed()) return cmd_test(ta);
        if (power->parsed()) return cmd_power(power_config, power_out, power_threads);
        if (rate->parsed()) {
            rc.family = parse_family(rate_family);
            rc.alpha = rate_alpha >= 0.0 ? rate_alpha : parse_env_double("TCAL_ALPHA", 0.05);
            return cmd_rate(rc, rate_out, rate_threads);
        }
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
