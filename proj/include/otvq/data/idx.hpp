#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otvq/data/dataset.hpp"

// IDX files (the MNIST distribution format): big-endian 32-bit magic
// 0x00000803 for u8 images (then N, rows, cols) or 0x00000801 for u8 labels
// (then N), followed by the raw bytes.

namespace otvq::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::uint64_t kIdxMaxBytes = std::uint64_t{1} << 32;

struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count x rows x cols
};

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const std::string& what) {
    if (b.size() < at + 4) throw FormatError(what + ": truncated header");
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes, const std::string& what = "idx images") {
    const std::uint32_t magic = detail::be32(bytes, 0, what);
    if (magic != kIdxImagesMagic) throw FormatError(what + ": bad magic " + std::to_string(magic));
    IdxImages img;
    img.count = detail::be32(bytes, 4, what);
    img.rows = detail::be32(bytes, 8, what);
    img.cols = detail::be32(bytes, 12, what);
    const std::uint64_t payload = std::uint64_t{img.count} * img.rows * img.cols;
    if (img.rows == 0 || img.cols == 0 || img.count == 0) throw FormatError(what + ": zero dimension");
    if (std::uint64_t{img.rows} * img.cols > std::numeric_limits<std::uint32_t>::max() || payload > kIdxMaxBytes) {
        throw FormatError(what + ": dimension overflow");
    }
    if (bytes.size() < 16 + payload) throw FormatError(what + ": truncated file");
    img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
    return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                                  const std::string& what = "idx labels") {
    const std::uint32_t magic = detail::be32(bytes, 0, what);
    if (magic != kIdxLabelsMagic) throw FormatError(what + ": bad magic " + std::to_string(magic));
    const std::uint32_t count = detail::be32(bytes, 4, what);
    if (bytes.size() < 8 + std::uint64_t{count}) throw FormatError(what + ": truncated file");
    return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

/// Loads an IDX image file (and optionally the matching label file) as a
/// Dataset with pixels scaled to [0, 1], flattened to rows * cols, peak 1.
/// `limit` keeps only the first images.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::optional<std::filesystem::path>& labels_path = std::nullopt,
                        std::size_t limit = std::numeric_limits<std::size_t>::max()) {
    const auto img = parse_idx_images(detail::read_bytes(images_path), images_path.string());
    std::vector<std::uint8_t> labels;
    if (labels_path) {
        labels = parse_idx_labels(detail::read_bytes(*labels_path), labels_path->string());
        if (labels.size() != img.count) {
            throw FormatError("count mismatch: " + std::to_string(img.count) + " images but " +
                              std::to_string(labels.size()) + " labels");
        }
    }
    const std::size_t n = std::min<std::size_t>(img.count, limit);
    Dataset d;
    d.name = images_path.filename().string();
    d.n_x = std::size_t{img.rows} * img.cols;
    d.peak = 1.0;
    d.samples.resize(n * d.n_x);
    for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i] = img.pixels[i] / 255.0;
    for (std::size_t i = 0; i < n && !labels.empty(); ++i) d.labels.push_back(labels[i]);
    d.validate();
    return d;
}

inline std::vector<std::uint8_t> encode_idx_images(const IdxImages& img) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + img.pixels.size());
    detail::put_be32(out, kIdxImagesMagic);
    detail::put_be32(out, img.count);
    detail::put_be32(out, img.rows);
    detail::put_be32(out, img.cols);
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out;
    detail::put_be32(out, kIdxLabelsMagic);
    detail::put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

inline void write_idx_images(const std::filesystem::path& path, const IdxImages& img) {
    detail::write_bytes(path, encode_idx_images(img));
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
    detail::write_bytes(path, encode_idx_labels(labels));
}

// Inverse of load_idx's scaling: pixel = round(255 * value).
inline IdxImages to_idx_images(const Dataset& d, std::uint32_t rows, std::uint32_t cols) {
    if (std::size_t{rows} * cols != d.n_x) throw ShapeError("to_idx_images: rows * cols != n_x");
    IdxImages img;
    img.count = static_cast<std::uint32_t>(d.size());
    img.rows = rows;
    img.cols = cols;
    img.pixels.reserve(d.samples.size());
    for (double v : d.samples) {
        const double c = std::clamp(std::round(v * 255.0), 0.0, 255.0);
        img.pixels.push_back(static_cast<std::uint8_t>(c));
    }
    return img;
}

}  // namespace otvq::data
