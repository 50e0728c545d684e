#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otvq/errors.hpp"

namespace otvq::vq {

// exp of the Shannon entropy of the empirical usage distribution; empty bins
// contribute nothing. Ranges over [1, K].
inline double perplexity(std::span<const std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw ValueError("perplexity: all counts are zero");
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return std::exp(h);
}

/// Codeword usage per latent component.
struct UsageStats {
    std::size_t K = 0;
    std::vector<std::vector<std::uint64_t>> counts;  // M x K
    std::uint64_t total = 0;                          // positions seen per component

    UsageStats() = default;
    UsageStats(std::size_t m, std::size_t k) : K(k), counts(m, std::vector<std::uint64_t>(k, 0)) {}

    std::size_t components() const { return counts.size(); }

    // Adds a B x M block of indices.
    void add(std::span<const std::size_t> indices) {
        const std::size_t m = counts.size();
        if (m == 0 || indices.size() % m != 0) throw ValueError("usage_histogram: index block is not B x M");
        for (std::size_t t = 0; t < indices.size(); ++t) {
            if (indices[t] >= K) {
                throw ValueError("usage_histogram: index " + std::to_string(indices[t]) + " out of range [0," +
                                 std::to_string(K) + ")");
            }
        }
        for (std::size_t t = 0; t < indices.size(); ++t) ++counts[t % m][indices[t]];
        total += indices.size() / m;
    }

    std::vector<double> perplexities() const {
        std::vector<double> p;
        p.reserve(counts.size());
        for (const auto& c : counts) p.push_back(perplexity(c));
        return p;
    }
};

inline UsageStats usage_histogram(std::span<const std::size_t> indices, std::size_t m, std::size_t k) {
    UsageStats s(m, k);
    s.add(indices);
    return s;
}

}  // namespace otvq::vq
