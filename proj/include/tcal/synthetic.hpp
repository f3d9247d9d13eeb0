#pragma once

// Synthetic joint laws for (Z, Y): the prediction Z is uniform on the simplex
// and the label satisfies Y | Z ~ Categorical(g(Z)), where g(z) = z + res(z)
// and res is a closed-form mis-calibration curve built from smooth bumps
//
//   zeta(x) = exp(-1 / (x (1 - x))) on (0,1), zero elsewhere.
//
// Families:
//   * calibrated        res = 0 (the null)
//   * example1          binary; one block of negative bumps then one block of
//                       positive bumps on z in (1/4, 3/4); m divisible by 4
//   * oscillating       binary; m alternating-sign bumps on z in (1/4, 3/4)
//   * multiclass_hard   K classes; tensor-product bumps on the cube
//                       (1/(2K), 1/K)^{K-1} in the first K-1 coordinates,
//                       pushed along (1, -1, 0, ..., 0) with a sign per cell
//
// Residual amplitudes scale as rho * m^{-s}; each constructor validates that
// g stays inside the simplex (range checks below are exact sufficient
// conditions, enforced rather than assumed).

#include <cstdint>
#include <string>
#include <vector>

#include "tcal/common.hpp"
#include "tcal/sample.hpp"

namespace tcal {

double zeta(double x);

// ||zeta||_inf = e^{-4}; L^p norms are evaluated once by adaptive quadrature
// (relative tolerance 1e-10) and cached.
double zeta_norm_inf();
double zeta_lp_integral(double p); // \int_0^1 zeta(x)^p dx
double zeta_norm_lp(double p);     // (\int zeta^p)^{1/p}

enum class ModelFamily { Calibrated, Example1, Oscillating, MulticlassHard };

struct SyntheticModel {
    ModelFamily family = ModelFamily::Calibrated;
    std::uint32_t K = 2;
    std::uint32_t m = 0;     // bump resolution (0 for the calibrated model)
    double s = 0.0;
    double rho = 0.0;
    std::vector<std::int8_t> eta; // multiclass cell signs, size m^{K-1}

    std::uint32_t m_requested = 0;  // example1 rounds m down to a multiple of 4
    bool s_warned = false;          // example1 s outside (1/4, 1/2)

    // Scalar residual of the first coordinate at z (binary families and the
    // multiclass generator share the representation res = r * (1,-1,0,...)).
    double residual_first(const double* z) const;

    // g(z) into out[0..K-1]; coordinates sum to 1 exactly by construction.
    void regression(const double* z, double* out) const;

    // Exact-by-factorization evaluation of (E sum_k |res_k(Z)|^p)^{1/p};
    // the single remaining integral of zeta^p is done by quadrature.
    double analytic_lp_ece(double p) const;

    std::string family_name() const;
};

SyntheticModel calibrated_uniform_model(std::uint32_t K);
SyntheticModel example1_model(std::uint32_t m, double s, double rho);
SyntheticModel oscillating_model(std::uint32_t m, double s, double rho);
SyntheticModel multiclass_hard_alternative(std::uint32_t m, double s, std::uint32_t K,
                                           double rho, std::vector<std::int8_t> eta);
// Convenience: all-(+1) sign vector.
SyntheticModel multiclass_hard_alternative(std::uint32_t m, double s, std::uint32_t K,
                                           double rho);

// Uniform draw from the (K-1)-simplex via normalized exponential spacings.
void sample_uniform_simplex(Rng& rng, std::uint32_t K, double* out);

// i.i.d. draws (Z_i, Y_i); deterministic given the stream. Appends nothing:
// `out` is reset and refilled so buffers can be reused across replicates.
void sample(const SyntheticModel& model, std::size_t n, Rng& rng, CalibrationSample& out);

CalibrationSample sample(const SyntheticModel& model, std::size_t n, Rng& rng);

} // namespace tcal
