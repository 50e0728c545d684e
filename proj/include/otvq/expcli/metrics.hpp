#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "otvq/errors.hpp"

namespace otvq::expcli {

/// One metrics.csv row: means over a logging interval of the training
/// objective's parts, codeword perplexity per component over the interval's
/// batches, and elapsed wallclock milliseconds since the run started.
struct MetricsRow {
    std::uint64_t iter = 0;
    double recon_mse = 0.0;
    double ws_term = 0.0;
    double kl_term = 0.0;
    double total_loss = 0.0;
    std::vector<double> perplexity;
    std::uint64_t wallclock_ms = 0;

    bool operator==(const MetricsRow&) const = default;
};

// iter,recon_mse,ws_term,kl_term,total_loss,perplexity_m0,...,perplexity_m{M-1},wallclock_ms
inline std::string metrics_header(std::size_t components) {
    std::string h = "iter,recon_mse,ws_term,kl_term,total_loss";
    for (std::size_t m = 0; m < components; ++m) h += ",perplexity_m" + std::to_string(m);
    return h + ",wallclock_ms";
}

// Reals use %.17g so a row parses back to the same doubles.
inline std::string format_metrics_row(const MetricsRow& r) {
    auto real = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string s = std::to_string(r.iter) + "," + real(r.recon_mse) + "," + real(r.ws_term) + "," +
                    real(r.kl_term) + "," + real(r.total_loss);
    for (double p : r.perplexity) s += "," + real(p);
    return s + "," + std::to_string(r.wallclock_ms);
}

inline MetricsRow parse_metrics_row(const std::string& line, std::size_t components) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6 + components) {
        throw FormatError("metrics row has " + std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(6 + components));
    }
    auto integer = [&](const std::string& s) {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw FormatError("metrics row: bad integer '" + s + "'");
        return static_cast<std::uint64_t>(v);
    };
    auto real = [&](const std::string& s) {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw FormatError("metrics row: bad number '" + s + "'");
        return v;
    };
    try {
        MetricsRow r;
        r.iter = integer(cells[0]);
        r.recon_mse = real(cells[1]);
        r.ws_term = real(cells[2]);
        r.kl_term = real(cells[3]);
        r.total_loss = real(cells[4]);
        for (std::size_t m = 0; m < components; ++m) r.perplexity.push_back(real(cells[5 + m]));
        r.wallclock_ms = integer(cells.back());
        return r;
    } catch (const std::logic_error&) {
        throw FormatError("metrics row: unparsable cell in '" + line + "'");
    }
}

}  // namespace otvq::expcli
