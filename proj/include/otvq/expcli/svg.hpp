#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "otvq/errors.hpp"

// Minimal standalone SVG charts. Coordinates are printed with fixed precision
// so equal inputs give byte-identical files.

namespace otvq::expcli {

namespace svg {

inline constexpr double kWidth = 640, kHeight = 400;
inline constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

inline std::string num(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Short label for tick values: %.4g.
inline std::string tick(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string header(const std::string& title) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, 0) + "\" height=\"" + num(kHeight, 0) +
         "\" viewBox=\"0 0 " + num(kWidth, 0) + " " + num(kHeight, 0) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth, 0) + "\" height=\"" + num(kHeight, 0) + "\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2, 0) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         escape(title) + "</text>\n";
    return s;
}

// Axes box plus axis titles and the four extreme tick labels.
inline std::string axes(const std::string& x_label, const std::string& y_label, double x0, double x1, double y0,
                        double y1) {
    const double px0 = kLeft, px1 = kWidth - kRight, py0 = kHeight - kBottom, py1 = kTop;
    std::string s;
    s += "<g stroke=\"black\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px1) + "\" y2=\"" + num(py0) + "\"/>\n";
    s += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) + "\" y2=\"" + num(py1) + "\"/>\n";
    s += "</g>\n";
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<text x=\"" + num(px0) + "\" y=\"" + num(py0 + 16) + "\" text-anchor=\"middle\">" + tick(x0) + "</text>\n";
    s += "<text x=\"" + num(px1) + "\" y=\"" + num(py0 + 16) + "\" text-anchor=\"middle\">" + tick(x1) + "</text>\n";
    s += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(py0 + 4) + "\" text-anchor=\"end\">" + tick(y0) + "</text>\n";
    s += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(py1 + 4) + "\" text-anchor=\"end\">" + tick(y1) + "</text>\n";
    s += "<text x=\"" + num((px0 + px1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num((py0 + py1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num((py0 + py1) / 2) + ")\">" + escape(y_label) + "</text>\n";
    s += "</g>\n";
    return s;
}

inline std::pair<double, double> padded_range(double lo, double hi) {
    if (hi > lo) return {lo, hi};
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.5;
    return {lo - pad, hi + pad};
}

}  // namespace svg

/// Line chart of y against x as a single polyline.
inline std::string line_chart_svg(std::span<const double> x, std::span<const double> y, const std::string& title,
                                  const std::string& x_label, const std::string& y_label) {
    if (x.empty() || x.size() != y.size()) throw ValueError("line chart: need equally long, nonempty series");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NumericError("line chart: non-finite point");
    }
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    const auto [x0, x1] = svg::padded_range(*xmin, *xmax);
    const auto [y0, y1] = svg::padded_range(*ymin, *ymax);
    const double pw = svg::kWidth - svg::kLeft - svg::kRight, ph = svg::kHeight - svg::kTop - svg::kBottom;

    std::string s = svg::header(title) + svg::axes(x_label, y_label, x0, x1, y0, y1);
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double px = svg::kLeft + (x[i] - x0) / (x1 - x0) * pw;
        const double py = svg::kHeight - svg::kBottom - (y[i] - y0) / (y1 - y0) * ph;
        if (i) s += ' ';
        s += svg::num(px) + "," + svg::num(py);
    }
    s += "\"/>\n</svg>\n";
    return s;
}

/// One bar per bin, heights proportional to the counts.
inline std::string histogram_svg(std::span<const std::uint64_t> counts, const std::string& title,
                                 const std::string& x_label, const std::string& y_label) {
    if (counts.empty()) throw ValueError("histogram: no bins");
    const std::uint64_t top = std::max<std::uint64_t>(1, *std::max_element(counts.begin(), counts.end()));
    const double pw = svg::kWidth - svg::kLeft - svg::kRight, ph = svg::kHeight - svg::kTop - svg::kBottom;
    const double slot = pw / static_cast<double>(counts.size());

    std::string s = svg::header(title) +
                    svg::axes(x_label, y_label, 0, static_cast<double>(counts.size() - 1), 0, static_cast<double>(top));
    s += "<g fill=\"#4c72b0\">\n";
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double h = static_cast<double>(counts[k]) / static_cast<double>(top) * ph;
        s += "<rect x=\"" + svg::num(svg::kLeft + k * slot + slot * 0.1) + "\" y=\"" +
             svg::num(svg::kHeight - svg::kBottom - h) + "\" width=\"" + svg::num(slot * 0.8) + "\" height=\"" +
             svg::num(h) + "\"/>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

// Axes and title only, with a note in place of data.
inline std::string empty_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label) {
    std::string s = svg::header(title) + svg::axes(x_label, y_label, 0, 1, 0, 1);
    s += "<text x=\"" + svg::num(svg::kWidth / 2) + "\" y=\"" + svg::num(svg::kHeight / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">no data</text>\n</svg>\n";
    return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace otvq::expcli
