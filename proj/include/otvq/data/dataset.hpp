#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otvq/errors.hpp"

namespace otvq::data {

/// N samples in R^{n_x}, row-major, with the metadata needed for evaluation.
struct Dataset {
    std::string name;
    std::size_t n_x = 0;
    std::vector<double> samples;  // N x n_x
    double peak = 1.0;            // data range used as the PSNR peak
    std::vector<int> labels;      // optional, empty or length N
    std::uint64_t seed = 0;

    std::size_t size() const { return n_x ? samples.size() / n_x : 0; }
    std::span<const double> sample(std::size_t i) const { return {samples.data() + i * n_x, n_x}; }

    void validate() const {
        if (n_x == 0 || samples.empty()) throw ValueError("Dataset '" + name + "': empty");
        if (samples.size() % n_x != 0) throw ShapeError("Dataset '" + name + "': sample array not N x n_x");
        if (!labels.empty() && labels.size() != size()) throw ShapeError("Dataset '" + name + "': label count");
        for (double v : samples) {
            if (!std::isfinite(v)) throw NumericError("Dataset '" + name + "': non-finite sample");
        }
        if (!(peak > 0.0)) throw ValueError("Dataset '" + name + "': peak must be positive");
    }

    // First n samples (n clamped to the dataset size).
    Dataset head(std::size_t n) const {
        Dataset d = *this;
        n = std::min(n, size());
        d.samples.resize(n * n_x);
        if (!d.labels.empty()) d.labels.resize(n);
        return d;
    }
};

}  // namespace otvq::data
