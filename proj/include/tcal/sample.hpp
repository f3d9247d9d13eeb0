#pragma once

// Sample containers. A CalibrationSample is an ordered list of (prediction on
// the K-simplex, one-hot label); predictions are stored flat, row-major.
// Binary identification for K=2: scalar z stands for the vector (z, 1-z) and
// y in {0,1} marks a hit on the first coordinate, i.e. y=1 <-> class index 0.

#include <cstdint>
#include <vector>

#include "tcal/common.hpp"

namespace tcal {

struct CalibrationSample {
    std::size_t n = 0;
    std::size_t K = 0;
    std::vector<double> p;        // n*K, row-major; each row on the simplex
    std::vector<std::uint32_t> y; // 0-based class indices, size n

    const double* row(std::size_t i) const { return p.data() + i * K; }

    void reserve(std::size_t count, std::size_t classes) {
        K = classes;
        p.reserve(count * classes);
        y.reserve(count);
    }

    void push_row(const double* zi, std::uint32_t label) {
        p.insert(p.end(), zi, zi + K);
        y.push_back(label);
        ++n;
    }
};

struct BinarySample {
    std::vector<double> z;       // predicted probability of y = 1
    std::vector<std::uint8_t> y; // 0 or 1

    std::size_t n() const { return z.size(); }
};

struct ValidationOptions {
    double tolerance = 1e-9; // allowed |sum - 1| and coordinate undershoot
    bool renormalize = false;
};

// Checks simplex membership and label range; with renormalize, rows whose sum
// deviates by more than `tolerance` (but are otherwise sane) are rescaled.
// Throws DataError naming the first offending row (0-based).
void validate_sample(CalibrationSample& s, const ValidationOptions& opts = {});

// K=2 bridge in both directions (see binary identification above).
BinarySample to_binary(const CalibrationSample& s);
CalibrationSample from_binary(const BinarySample& b);

} // namespace tcal
