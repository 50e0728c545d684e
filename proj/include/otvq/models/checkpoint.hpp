#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "otvq/models/train.hpp"

// Checkpoint layout (version 1), all integers little-endian:
//
//   bytes 0..7    "OTVQCKPT"
//   u32           format version
//   u64           header length H
//   H bytes       JSON header: model config, iteration, sampler state, Adam
//                 step counters and an ordered list of {name, shape} arrays
//   payload       the listed arrays as raw f64, in header order
//
// Doubles are stored bit-exact, so save -> load is lossless.

namespace otvq::models {

inline constexpr char kCheckpointMagic[8] = {'O', 'T', 'V', 'Q', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"method", method_name(c.method)},
            {"n_x", c.n_x},
            {"K", c.K},
            {"M", c.M},
            {"n_z", c.n_z},
            {"hidden", c.hidden},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"phi_lr", c.phi_lr},
            {"phi_iters", c.phi_iters},
            {"beta", c.weights.beta},
            {"lambda", c.weights.lambda},
            {"lambda_r", c.weights.lambda_r},
            {"eps", c.weights.eps},
            {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.method = parse_method(j.at("method").get<std::string>());
    c.n_x = j.at("n_x").get<std::size_t>();
    c.K = j.at("K").get<std::size_t>();
    c.M = j.at("M").get<std::size_t>();
    c.n_z = j.at("n_z").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.phi_lr = j.at("phi_lr").get<double>();
    c.phi_iters = j.at("phi_iters").get<std::size_t>();
    c.weights.beta = j.at("beta").get<double>();
    c.weights.lambda = j.at("lambda").get<double>();
    c.weights.lambda_r = j.at("lambda_r").get<double>();
    c.weights.eps = j.at("eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace detail {

struct ArrayTable {
    nlohmann::json index = nlohmann::json::array();
    std::vector<double> payload;

    void put(const std::string& name, const Shape& shape, std::span<const double> v) {
        index.push_back({{"name", name}, {"shape", shape}});
        payload.insert(payload.end(), v.begin(), v.end());
    }
    void put(const std::string& name, const Tensor& t) { put(name, t.shape(), t.values()); }
};

template <class T>
void append_le(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

template <class T>
T read_le(const std::string& in, std::size_t& at) {
    if (in.size() < at + sizeof(T)) throw FormatError("checkpoint: truncated");
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
}

inline void put_adam(ArrayTable& t, const std::string& prefix, const AdamState& a) {
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        t.put(prefix + ".m." + std::to_string(i), Shape{a.m[i].size()}, a.m[i]);
        t.put(prefix + ".v." + std::to_string(i), Shape{a.v[i].size()}, a.v[i]);
    }
}

}  // namespace detail

inline std::string encode_checkpoint(const TrainState& s) {
    detail::ArrayTable t;
    for (std::size_t l = 0; l < s.net.encoder.size(); ++l) {
        t.put("enc." + std::to_string(l) + ".w", s.net.encoder[l].w);
        t.put("enc." + std::to_string(l) + ".b", s.net.encoder[l].b);
    }
    for (std::size_t l = 0; l < s.net.decoder.size(); ++l) {
        t.put("dec." + std::to_string(l) + ".w", s.net.decoder[l].w);
        t.put("dec." + std::to_string(l) + ".b", s.net.decoder[l].b);
    }
    t.put("atoms", s.codebook.atoms);
    t.put("beta", s.codebook.beta);
    for (std::size_t m = 0; m < s.phis.components(); ++m) t.put("phi." + std::to_string(m), Shape{s.phis.phi[m].size()}, s.phis.phi[m]);
    detail::put_adam(t, "min_adam", s.min_adam);
    std::vector<std::uint64_t> phi_t;
    for (std::size_t m = 0; m < s.phi_adam.adam.size(); ++m) {
        detail::put_adam(t, "phi_adam." + std::to_string(m), s.phi_adam.adam[m]);
        phi_t.push_back(s.phi_adam.adam[m].t);
    }

    const nlohmann::json header = {{"config", config_to_json(s.config)},
                                   {"iteration", s.iteration},
                                   {"sampler_state", s.sampler_state},
                                   {"min_adam_t", s.min_adam.t},
                                   {"phi_adam_t", phi_t},
                                   {"arrays", t.index}};
    const std::string h = header.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::append_le(out, kCheckpointVersion);
    detail::append_le(out, static_cast<std::uint64_t>(h.size()));
    out += h;
    for (double v : t.payload) detail::append_le(out, v);
    return out;
}

inline TrainState decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        throw FormatError("checkpoint: bad magic");
    }
    std::size_t at = sizeof kCheckpointMagic;
    const auto version = detail::read_le<std::uint32_t>(bytes, at);
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto hlen = detail::read_le<std::uint64_t>(bytes, at);
    if (bytes.size() - at < hlen) throw FormatError("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(at, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
    at += hlen;

    std::map<std::string, Tensor> arrays;
    try {
        for (const auto& entry : header.at("arrays")) {
            Shape shape = entry.at("shape").get<Shape>();
            std::vector<double> v(shape_size(shape));
            for (auto& x : v) x = detail::read_le<double>(bytes, at);
            arrays.emplace(entry.at("name").get<std::string>(), Tensor::constant(std::move(shape), std::move(v)));
        }
        if (at != bytes.size()) throw FormatError("checkpoint: trailing bytes");

        TrainState s = init_state(config_from_json(header.at("config")));
        auto take = [&](const std::string& name, const Shape& expect) {
            auto it = arrays.find(name);
            if (it == arrays.end()) throw FormatError("checkpoint: missing array '" + name + "'");
            if (it->second.shape() != expect) throw FormatError("checkpoint: array '" + name + "' has wrong shape");
            auto v = it->second.values();
            return std::vector<double>(v.begin(), v.end());
        };
        auto restore_layers = [&](std::vector<Dense>& layers, const std::string& prefix) {
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const std::string p = prefix + "." + std::to_string(l);
                layers[l].w = Tensor::parameter(layers[l].w.shape(), take(p + ".w", layers[l].w.shape()));
                layers[l].b = Tensor::parameter(layers[l].b.shape(), take(p + ".b", layers[l].b.shape()));
            }
        };
        restore_layers(s.net.encoder, "enc");
        restore_layers(s.net.decoder, "dec");
        s.codebook.atoms = Tensor::parameter(s.codebook.atoms.shape(), take("atoms", s.codebook.atoms.shape()));
        s.codebook.beta = Tensor::parameter(s.codebook.beta.shape(), take("beta", s.codebook.beta.shape()));
        for (std::size_t m = 0; m < s.phis.components(); ++m) s.phis.phi[m] = take("phi." + std::to_string(m), Shape{s.config.K});

        auto restore_adam = [&](AdamState& a, const std::string& prefix, std::uint64_t t) {
            a.t = t;
            for (std::size_t i = 0; arrays.count(prefix + ".m." + std::to_string(i)); ++i) {
                const auto n = arrays.at(prefix + ".m." + std::to_string(i)).size();
                a.m.push_back(take(prefix + ".m." + std::to_string(i), Shape{n}));
                a.v.push_back(take(prefix + ".v." + std::to_string(i), Shape{n}));
            }
        };
        restore_adam(s.min_adam, "min_adam", header.at("min_adam_t").get<std::uint64_t>());
        const auto phi_t = header.at("phi_adam_t").get<std::vector<std::uint64_t>>();
        for (std::size_t m = 0; m < phi_t.size(); ++m) {
            s.phi_adam.adam.emplace_back(AdamHyper{.lr = s.config.phi_lr});
            restore_adam(s.phi_adam.adam.back(), "phi_adam." + std::to_string(m), phi_t[m]);
        }
        s.iteration = header.at("iteration").get<std::uint64_t>();
        s.sampler_state = header.at("sampler_state").get<std::string>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainState& s) {
    const std::string bytes = encode_checkpoint(s);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
}

inline TrainState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    return decode_checkpoint(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

}  // namespace otvq::models
