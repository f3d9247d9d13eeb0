#include "tcal/synthetic.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <mutex>

#include "tcal/binning.hpp"

namespace tcal {

double zeta(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    double t = x * (1.0 - x);
    return std::exp(-1.0 / t); // t -> 0 gives exp(-inf) = 0, no special casing
}

double zeta_norm_inf() { return std::exp(-4.0); }

namespace {

double quad_zeta_pow(double p) {
    auto f = [p](double x) { return std::pow(zeta(x), p); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, 1.0, 15, 1e-10);
}

} // namespace

double zeta_lp_integral(double p) {
    if (p == 1.0) {
        static const double v = quad_zeta_pow(1.0);
        return v;
    }
    if (p == 2.0) {
        static const double v = quad_zeta_pow(2.0);
        return v;
    }
    return quad_zeta_pow(p);
}

double zeta_norm_lp(double p) { return std::pow(zeta_lp_integral(p), 1.0 / p); }

std::string SyntheticModel::family_name() const {
    switch (family) {
        case ModelFamily::Calibrated: return "calibrated";
        case ModelFamily::Example1: return "example1";
        case ModelFamily::Oscillating: return "oscillating";
        case ModelFamily::MulticlassHard: return "multiclass-hard";
    }
    return "unknown";
}

double SyntheticModel::residual_first(const double* z) const {
    switch (family) {
        case ModelFamily::Calibrated:
            return 0.0;
        case ModelFamily::Example1: {
            // Bump j covers t = m z - m/4 in (j, j+1), j = 0 .. m/2-1;
            // the first m/4 bumps pull down, the rest push up.
            double t = static_cast<double>(m) * z[0] - 0.25 * static_cast<double>(m);
            if (t <= 0.0) return 0.0;
            double fl = std::floor(t);
            auto j = static_cast<std::int64_t>(fl);
            if (j < 0 || j >= static_cast<std::int64_t>(m / 2)) return 0.0;
            double val = rho * std::pow(static_cast<double>(m), -s) * zeta(t - fl);
            return (j < static_cast<std::int64_t>(m / 4)) ? -val : val;
        }
        case ModelFamily::Oscillating: {
            // Bump j covers t = 2 m z - m/2 in (j, j+1), j = 0 .. m-1, with
            // alternating signs.
            double t = 2.0 * static_cast<double>(m) * z[0] - 0.5 * static_cast<double>(m);
            if (t <= 0.0) return 0.0;
            double fl = std::floor(t);
            auto j = static_cast<std::int64_t>(fl);
            if (j < 0 || j >= static_cast<std::int64_t>(m)) return 0.0;
            double val = rho * std::pow(static_cast<double>(m), -s) * zeta(t - fl);
            return (j % 2 == 0) ? val : -val;
        }
        case ModelFamily::MulticlassHard: {
            // Tensor-product bump over the first K-1 coordinates; cell j_k is
            // hit when tau_k = m (2K z_k - 1) lies in (j_k, j_k + 1).
            const std::uint32_t d = K - 1;
            double prod = 1.0;
            std::uint64_t rank = 0;
            std::uint64_t radix = 1;
            for (std::uint32_t k = 0; k < d; ++k) {
                double tau = static_cast<double>(m) *
                             (2.0 * static_cast<double>(K) * z[k] - 1.0);
                if (tau <= 0.0 || tau >= static_cast<double>(m)) return 0.0;
                double fl = std::floor(tau);
                double v = zeta(tau - fl);
                if (v == 0.0) return 0.0;
                prod *= v;
                rank += static_cast<std::uint64_t>(fl) * radix;
                radix *= m;
            }
            double sign = static_cast<double>(eta[rank]);
            return sign * rho * std::pow(static_cast<double>(m), -s) * prod;
        }
    }
    return 0.0;
}

void SyntheticModel::regression(const double* z, double* out) const {
    for (std::uint32_t k = 0; k < K; ++k) out[k] = z[k];
    double r = residual_first(z);
    if (r != 0.0) {
        out[0] += r;
        out[1] -= r;
    }
}

double SyntheticModel::analytic_lp_ece(double p) const {
    if (p != 1.0 && p != 2.0)
        throw InvalidArgumentError("analytic_lp_ece: only p = 1 and p = 2 are supported");
    if (family == ModelFamily::Calibrated) return 0.0;

    const double integral = zeta_lp_integral(p);
    const double scale = rho * std::pow(static_cast<double>(m), -s);
    if (family == ModelFamily::Example1 || family == ModelFamily::Oscillating) {
        // E sum_k |res_k|^p = 2 (rho m^-s)^p * (total bump measure 1/2) * int zeta^p.
        return scale * std::pow(integral, 1.0 / p);
    }
    // Multiclass: m^{K-1} disjoint cells, chart density (K-1)!, each axis
    // contributing int zeta^p / (2Km); the m factors cancel against the count.
    double fact = 1.0;
    for (std::uint32_t i = 2; i < K; ++i) fact *= static_cast<double>(i);
    double per_axis = integral / (2.0 * static_cast<double>(K));
    double total = 2.0 * fact * std::pow(per_axis, static_cast<double>(K - 1));
    return scale * std::pow(total, 1.0 / p);
}

SyntheticModel calibrated_uniform_model(std::uint32_t K) {
    if (K < 2) throw InvalidArgumentError("calibrated_uniform_model: K must be >= 2");
    SyntheticModel mod;
    mod.family = ModelFamily::Calibrated;
    mod.K = K;
    return mod;
}

namespace {

void check_binary_range(std::uint32_t m, double s, double rho, const char* who) {
    // Bumps live on z in (1/4, 3/4) and have amplitude rho m^-s ||zeta||_inf,
    // so g stays in [0,1] iff that amplitude is at most 1/4.
    double amp = rho * std::pow(static_cast<double>(m), -s) * zeta_norm_inf();
    if (!(amp <= 0.25 + 1e-12))
        throw InvalidArgumentError(std::string(who) +
                                   ": rho m^-s exp(-4) = " + std::to_string(amp) +
                                   " exceeds 1/4; g would leave [0,1]");
}

} // namespace

SyntheticModel example1_model(std::uint32_t m, double s, double rho) {
    std::uint32_t m_rounded = (m / 4) * 4;
    if (m_rounded == 0)
        throw InvalidArgumentError("example1_model: m must be at least 4");
    if (rho < 0.0) throw InvalidArgumentError("example1_model: rho must be nonnegative");
    check_binary_range(m_rounded, s, rho, "example1_model");

    SyntheticModel mod;
    mod.family = ModelFamily::Example1;
    mod.K = 2;
    mod.m = m_rounded;
    mod.m_requested = m;
    mod.s = s;
    mod.rho = rho;
    mod.s_warned = !(s > 0.25 && s < 0.5);
    return mod;
}

SyntheticModel oscillating_model(std::uint32_t m, double s, double rho) {
    if (m == 0) throw InvalidArgumentError("oscillating_model: m must be positive");
    if (rho < 0.0) throw InvalidArgumentError("oscillating_model: rho must be nonnegative");
    check_binary_range(m, s, rho, "oscillating_model");

    SyntheticModel mod;
    mod.family = ModelFamily::Oscillating;
    mod.K = 2;
    mod.m = m;
    mod.m_requested = m;
    mod.s = s;
    mod.rho = rho;
    return mod;
}

SyntheticModel multiclass_hard_alternative(std::uint32_t m, double s, std::uint32_t K,
                                           double rho, std::vector<std::int8_t> eta) {
    Partition cells = build_partition(m, K); // validates m, K; counts m^{K-1}
    if (rho < 0.0)
        throw InvalidArgumentError("multiclass_hard_alternative: rho must be nonnegative");
    double bound = rho * std::pow(zeta_norm_inf(), static_cast<double>(K - 1));
    if (!(bound <= 1.0 / (2.0 * static_cast<double>(K)) + 1e-12))
        throw InvalidArgumentError(
            "multiclass_hard_alternative: rho ||zeta||_inf^(K-1) exceeds 1/(2K)");
    if (eta.size() != cells.cell_count)
        throw InvalidArgumentError("multiclass_hard_alternative: eta must have m^(K-1) entries");
    for (std::int8_t e : eta)
        if (e != 1 && e != -1)
            throw InvalidArgumentError("multiclass_hard_alternative: eta entries must be +-1");

    SyntheticModel mod;
    mod.family = ModelFamily::MulticlassHard;
    mod.K = K;
    mod.m = m;
    mod.m_requested = m;
    mod.s = s;
    mod.rho = rho;
    mod.eta = std::move(eta);
    return mod;
}

SyntheticModel multiclass_hard_alternative(std::uint32_t m, double s, std::uint32_t K,
                                           double rho) {
    Partition cells = build_partition(m, K);
    return multiclass_hard_alternative(
        m, s, K, rho, std::vector<std::int8_t>(cells.cell_count, 1));
}

void sample_uniform_simplex(Rng& rng, std::uint32_t K, double* out) {
    double sum = 0.0;
    for (std::uint32_t k = 0; k < K; ++k) {
        double e = -std::log(1.0 - uniform01(rng));
        out[k] = e;
        sum += e;
    }
    if (sum <= 0.0) { // astronomically unlikely; keep the map total
        for (std::uint32_t k = 0; k < K; ++k) out[k] = 1.0 / static_cast<double>(K);
        return;
    }
    for (std::uint32_t k = 0; k < K; ++k) out[k] /= sum;
}

void sample(const SyntheticModel& model, std::size_t n, Rng& rng, CalibrationSample& out) {
    const std::uint32_t K = model.K;
    out.n = 0;
    out.K = K;
    out.p.clear();
    out.y.clear();
    out.p.resize(n * K);
    out.y.resize(n);
    out.n = n;

    std::vector<double> g(K);
    for (std::size_t i = 0; i < n; ++i) {
        double* z = out.p.data() + i * K;
        sample_uniform_simplex(rng, K, z);
        model.regression(z, g.data());
        double u = uniform01(rng);
        double cum = 0.0;
        std::uint32_t label = K - 1;
        for (std::uint32_t k = 0; k < K; ++k) {
            cum += g[k];
            if (u < cum) {
                label = k;
                break;
            }
        }
        out.y[i] = label;
    }
}

CalibrationSample sample(const SyntheticModel& model, std::size_t n, Rng& rng) {
    CalibrationSample s;
    sample(model, n, rng, s);
    return s;
}

} // namespace tcal
