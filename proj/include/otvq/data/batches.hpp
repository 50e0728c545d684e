#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "otvq/data/dataset.hpp"
#include "otvq/diffcore/tensor.hpp"

namespace otvq::data {

/// Endless sequence of B x n_x mini-batches. Each epoch is a permutation of
/// the dataset (drawn from the stream's own generator when shuffling) cut into
/// consecutive chunks of B; the remainder that does not fill a batch is dropped.
class BatchStream {
public:
    BatchStream(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle)
        : dataset_(&dataset), batch_(batch_size), shuffle_(shuffle), rng_(seed) {
        if (batch_size == 0) throw ValueError("batches: batch size must be positive");
        if (batch_size > dataset.size()) {
            throw ValueError("batches: batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                             std::to_string(dataset.size()));
        }
        order_.resize(dataset.size());
        start_epoch();
    }

    std::size_t batches_per_epoch() const { return dataset_->size() / batch_; }

    // Row indices of the next batch.
    std::vector<std::size_t> next_indices() {
        if (cursor_ + batch_ > order_.size()) start_epoch();
        std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
        cursor_ += batch_;
        return idx;
    }

    Tensor next() { return gather(*dataset_, next_indices()); }

    static Tensor gather(const Dataset& d, const std::vector<std::size_t>& rows) {
        std::vector<double> v;
        v.reserve(rows.size() * d.n_x);
        for (std::size_t r : rows) {
            auto s = d.sample(r);
            v.insert(v.end(), s.begin(), s.end());
        }
        return Tensor::constant(Shape{rows.size(), d.n_x}, std::move(v));
    }

    // Generator state, epoch order and cursor, for checkpointing.
    std::string save_state() const {
        std::ostringstream os;
        os << rng_ << ' ' << cursor_ << ' ' << epoch_;
        for (std::size_t i : order_) os << ' ' << i;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> rng_ >> cursor_ >> epoch_;
        for (auto& i : order_) is >> i;
        if (!is) throw FormatError("BatchStream: corrupt sampler state");
    }

    std::uint64_t epoch() const { return epoch_; }

private:
    void start_epoch() {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
        ++epoch_;
    }

    const Dataset* dataset_;
    std::size_t batch_;
    bool shuffle_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::uint64_t epoch_ = 0;
};

// One epoch of batches.
inline std::vector<Tensor> batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
    BatchStream stream(dataset, batch_size, seed, shuffle);
    std::vector<Tensor> out;
    for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) out.push_back(stream.next());
    return out;
}

}  // namespace otvq::data
