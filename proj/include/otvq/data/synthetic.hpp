#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "otvq/data/dataset.hpp"

namespace otvq::data {

// Cluster centers: evenly spaced on the unit circle in 2-D; otherwise random
// corners of the [-1, 1]^n_x cube.
inline std::vector<double> mixture_centers(std::size_t n_clusters, std::size_t n_x, std::mt19937_64& rng) {
    std::vector<double> centers(n_clusters * n_x);
    if (n_x == 2) {
        for (std::size_t c = 0; c < n_clusters; ++c) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_clusters);
            centers[c * 2] = std::cos(angle);
            centers[c * 2 + 1] = std::sin(angle);
        }
    } else {
        std::bernoulli_distribution coin(0.5);
        for (auto& v : centers) v = coin(rng) ? 1.0 : -1.0;
    }
    return centers;
}

/// Isotropic Gaussian mixture, points_per_cluster samples per center with
/// standard deviation `spread`. Samples are grouped by cluster and labelled
/// with the cluster index.
inline Dataset gen_gaussian_mixture(std::size_t n_clusters, std::size_t n_x, std::size_t points_per_cluster,
                                    double spread, std::uint64_t seed) {
    if (n_clusters == 0 || n_x == 0 || points_per_cluster == 0) {
        throw ValueError("gen_gaussian_mixture: counts must be positive");
    }
    if (!(spread >= 0.0)) throw ValueError("gen_gaussian_mixture: spread must be nonnegative");
    std::mt19937_64 rng(seed);
    const auto centers = mixture_centers(n_clusters, n_x, rng);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset d;
    d.name = "gaussian_mixture";
    d.n_x = n_x;
    d.seed = seed;
    d.samples.reserve(n_clusters * points_per_cluster * n_x);
    for (std::size_t c = 0; c < n_clusters; ++c) {
        for (std::size_t p = 0; p < points_per_cluster; ++p) {
            for (std::size_t j = 0; j < n_x; ++j) d.samples.push_back(centers[c * n_x + j] + spread * noise(rng));
            d.labels.push_back(static_cast<int>(c));
        }
    }
    const auto [lo, hi] = std::minmax_element(d.samples.begin(), d.samples.end());
    d.peak = *hi > *lo ? *hi - *lo : 1.0;
    d.validate();
    return d;
}

}  // namespace otvq::data
