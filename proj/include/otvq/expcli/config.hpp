#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "otvq/data.hpp"
#include "otvq/models/train.hpp"

namespace otvq::expcli {

enum class DatasetKind { GaussianMixture, Idx };

/// A training run as read from a flat JSON object. Every key is optional;
/// missing keys keep the defaults below.
///
///   method            "vqwae" | "vqvae"                 (vqwae)
///   dataset           "gaussian_mixture" | "idx"        (gaussian_mixture)
///   n_clusters, points_per_cluster, spread, data_dim, data_seed
///                     synthetic mixture parameters      (8, 250, 0.15, 2, 100)
///   images, labels    IDX paths; these and out_dir are relative to the config file
///   limit             keep the first N IDX images, 0 = all (0)
///   K, M, n_z         codebook size, components, latent dim (16, 1, 8)
///   hidden            encoder hidden widths             ([128, 128])
///   batch_size        B                                 (32)
///   iters             training iterations               (3000)
///   lr, phi_lr        Adam rates, min group / potentials (1e-4, 0.05)
///   lambda, lambda_r, beta, eps, phi_iters              (1e-3, 1.0, 0.25, 0.1, 5)
///   seed              model, codebook and batch seed    (0)
///   log_every         iterations per metrics.csv row    (50)
///   wallclock         record wallclock_ms in metrics.csv (false: column is 0)
///   out_dir           output directory                  ("runs/default")
struct TrainConfig {
    models::ModelConfig model;
    DatasetKind dataset = DatasetKind::GaussianMixture;
    std::size_t n_clusters = 8;
    std::size_t points_per_cluster = 250;
    double spread = 0.15;
    std::size_t data_dim = 2;
    std::uint64_t data_seed = 100;
    std::filesystem::path images;
    std::filesystem::path labels;
    std::size_t limit = 0;
    std::size_t iters = 3000;
    std::size_t log_every = 50;
    bool wallclock = false;
    std::filesystem::path out_dir = "runs/default";
};

namespace detail {

inline double as_number(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("key '" + key + "': expected a number, got " + std::string(v.type_name()));
    return v.get<double>();
}

inline std::uint64_t as_count(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError("key '" + key + "': expected a nonnegative integer, got " + v.dump());
    }
    return v.get<std::uint64_t>();
}

inline std::string as_string(const nlohmann::json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("key '" + key + "': expected a string, got " + std::string(v.type_name()));
    return v.get<std::string>();
}

inline bool as_bool(const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("key '" + key + "': expected true or false, got " + v.dump());
    return v.get<bool>();
}

inline void require_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError("key '" + key + "': must be positive");
}

}  // namespace detail

/// Strict parse of a flat JSON object. `base_dir` anchors relative IDX paths.
inline TrainConfig parse_config_json(const std::string& text, const std::filesystem::path& base_dir = ".") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    TrainConfig c;
    auto& m = c.model;
    using detail::as_count;
    using detail::as_number;
    const std::map<std::string, std::function<void(const nlohmann::json&, const std::string&)>> setters = {
        {"method", [&](auto& v, auto& k) { m.method = models::parse_method(detail::as_string(v, k)); }},
        {"dataset",
         [&](auto& v, auto& k) {
             const auto s = detail::as_string(v, k);
             if (s == "gaussian_mixture") c.dataset = DatasetKind::GaussianMixture;
             else if (s == "idx") c.dataset = DatasetKind::Idx;
             else throw ConfigError("key 'dataset': unknown dataset '" + s + "' (expected gaussian_mixture or idx)");
         }},
        {"n_clusters", [&](auto& v, auto& k) { c.n_clusters = as_count(v, k); }},
        {"points_per_cluster", [&](auto& v, auto& k) { c.points_per_cluster = as_count(v, k); }},
        {"spread", [&](auto& v, auto& k) { c.spread = as_number(v, k); }},
        {"data_dim", [&](auto& v, auto& k) { c.data_dim = as_count(v, k); }},
        {"data_seed", [&](auto& v, auto& k) { c.data_seed = as_count(v, k); }},
        {"images", [&](auto& v, auto& k) { c.images = base_dir / detail::as_string(v, k); }},
        {"labels", [&](auto& v, auto& k) { c.labels = base_dir / detail::as_string(v, k); }},
        {"limit", [&](auto& v, auto& k) { c.limit = as_count(v, k); }},
        {"K", [&](auto& v, auto& k) { m.K = as_count(v, k); }},
        {"M", [&](auto& v, auto& k) { m.M = as_count(v, k); }},
        {"n_z", [&](auto& v, auto& k) { m.n_z = as_count(v, k); }},
        {"hidden",
         [&](auto& v, auto& k) {
             if (!v.is_array()) throw ConfigError("key '" + k + "': expected an array of widths");
             m.hidden.clear();
             for (const auto& w : v) m.hidden.push_back(as_count(w, k));
         }},
        {"batch_size", [&](auto& v, auto& k) { m.batch_size = as_count(v, k); }},
        {"iters", [&](auto& v, auto& k) { c.iters = as_count(v, k); }},
        {"lr", [&](auto& v, auto& k) { m.lr = as_number(v, k); }},
        {"phi_lr", [&](auto& v, auto& k) { m.phi_lr = as_number(v, k); }},
        {"lambda", [&](auto& v, auto& k) { m.weights.lambda = as_number(v, k); }},
        {"lambda_r", [&](auto& v, auto& k) { m.weights.lambda_r = as_number(v, k); }},
        {"beta", [&](auto& v, auto& k) { m.weights.beta = as_number(v, k); }},
        {"eps", [&](auto& v, auto& k) { m.weights.eps = as_number(v, k); }},
        {"phi_iters", [&](auto& v, auto& k) { m.phi_iters = as_count(v, k); }},
        {"seed", [&](auto& v, auto& k) { m.seed = as_count(v, k); }},
        {"log_every", [&](auto& v, auto& k) { c.log_every = as_count(v, k); }},
        {"wallclock", [&](auto& v, auto& k) { c.wallclock = detail::as_bool(v, k); }},
        {"out_dir", [&](auto& v, auto& k) { c.out_dir = base_dir / detail::as_string(v, k); }},
    };
    for (const auto& [key, value] : j.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
        it->second(value, key);
    }

    for (auto [v, key] : {std::pair{m.K, "K"}, {m.M, "M"}, {m.n_z, "n_z"}, {m.batch_size, "batch_size"},
                          {c.log_every, "log_every"}}) {
        if (v == 0) throw ConfigError(std::string("key '") + key + "': must be positive");
    }
    for (std::size_t w : m.hidden) {
        if (w == 0) throw ConfigError("key 'hidden': widths must be positive");
    }
    detail::require_positive(m.weights.eps, "eps");
    for (auto [v, key] : {std::pair{m.lr, "lr"}, {m.phi_lr, "phi_lr"}, {m.weights.lambda, "lambda"},
                          {m.weights.lambda_r, "lambda_r"}, {m.weights.beta, "beta"}, {c.spread, "spread"}}) {
        if (!(v >= 0.0)) throw ConfigError(std::string("key '") + key + "': must be nonnegative");
    }
    if (c.dataset == DatasetKind::GaussianMixture) {
        if (c.n_clusters == 0 || c.points_per_cluster == 0 || c.data_dim == 0) {
            throw ConfigError("gaussian_mixture: n_clusters, points_per_cluster and data_dim must be positive");
        }
    } else if (c.images.empty()) {
        throw ConfigError("key 'images': required for dataset 'idx'");
    }
    return c;
}

inline TrainConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Builds the configured dataset; n_x of the model follows the data.
inline data::Dataset load_dataset(TrainConfig& c) {
    data::Dataset d;
    if (c.dataset == DatasetKind::GaussianMixture) {
        d = data::gen_gaussian_mixture(c.n_clusters, c.data_dim, c.points_per_cluster, c.spread, c.data_seed);
    } else {
        d = data::load_idx(c.images, c.labels.empty() ? std::nullopt : std::optional(c.labels),
                           c.limit ? c.limit : std::numeric_limits<std::size_t>::max());
    }
    c.model.n_x = d.n_x;
    if (c.model.batch_size > d.size()) {
        throw ConfigError("key 'batch_size': " + std::to_string(c.model.batch_size) + " exceeds the dataset size " +
                          std::to_string(d.size()));
    }
    return d;
}

}  // namespace otvq::expcli
