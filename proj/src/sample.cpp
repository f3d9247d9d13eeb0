#include "tcal/sample.hpp"

#include <cmath>
#include <string>

namespace tcal {

void validate_sample(CalibrationSample& s, const ValidationOptions& opts) {
    if (s.K < 2) throw InvalidArgumentError("sample: K must be at least 2");
    if (s.n == 0) throw DataError("sample: empty");
    if (s.p.size() != s.n * s.K || s.y.size() != s.n)
        throw InvalidArgumentError("sample: inconsistent buffer sizes");

    for (std::size_t i = 0; i < s.n; ++i) {
        double* zi = s.p.data() + i * s.K;
        double sum = 0.0;
        for (std::size_t k = 0; k < s.K; ++k) {
            if (!(zi[k] >= -opts.tolerance) || !std::isfinite(zi[k]))
                throw DataError("sample row " + std::to_string(i) +
                                ": negative or non-finite probability");
            sum += zi[k];
        }
        if (std::abs(sum - 1.0) > opts.tolerance) {
            if (!opts.renormalize || sum <= 0.0)
                throw DataError("sample row " + std::to_string(i) +
                                ": probabilities sum to " + std::to_string(sum));
            for (std::size_t k = 0; k < s.K; ++k) zi[k] /= sum;
        }
        // Clamp tolerance-level undershoot so downstream code sees [0,1].
        for (std::size_t k = 0; k < s.K; ++k) {
            if (zi[k] < 0.0) zi[k] = 0.0;
        }
        if (s.y[i] >= s.K)
            throw DataError("sample row " + std::to_string(i) + ": label out of range");
    }
}

BinarySample to_binary(const CalibrationSample& s) {
    if (s.K != 2) throw InvalidArgumentError("to_binary: sample must have K = 2");
    BinarySample b;
    b.z.resize(s.n);
    b.y.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        b.z[i] = s.row(i)[0];
        b.y[i] = (s.y[i] == 0) ? 1 : 0;
    }
    return b;
}

CalibrationSample from_binary(const BinarySample& b) {
    CalibrationSample s;
    s.reserve(b.n(), 2);
    for (std::size_t i = 0; i < b.n(); ++i) {
        double row[2] = {b.z[i], 1.0 - b.z[i]};
        s.push_row(row, b.y[i] ? 0u : 1u);
    }
    return s;
}

} // namespace tcal
