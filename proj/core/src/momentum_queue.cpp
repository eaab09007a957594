#include "snscl/momentum_queue.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace snscl::queue {

MomentumQueue::MomentumQueue(std::size_t num_classes, std::size_t per_class, std::size_t dim)
    : num_classes_(num_classes), per_class_(per_class), dim_(dim) {
    if (num_classes < 2) throw std::invalid_argument("MomentumQueue: need at least 2 classes");
    if (per_class == 0 || dim == 0) throw std::invalid_argument("MomentumQueue: capacity and dim must be positive");
    rings_.resize(num_classes);
    for (auto& r : rings_) {
        r.slots.assign(per_class * dim, 0.0);
        r.ids.assign(per_class, kNoSample);
    }
}

const MomentumQueue::Ring& MomentumQueue::ring(std::size_t cls) const {
    if (cls >= num_classes_) {
        throw std::out_of_range("MomentumQueue: class " + std::to_string(cls) + " out of range");
    }
    return rings_[cls];
}

void MomentumQueue::insert(std::size_t cls, std::span<const double> embedding, std::size_t sample_id) {
    if (cls >= num_classes_) {
        throw std::out_of_range("MomentumQueue: class " + std::to_string(cls) + " out of range");
    }
    if (embedding.size() != dim_) throw std::invalid_argument("MomentumQueue: embedding has wrong dimension");
    const double norm = l2_norm(embedding);
    if (std::abs(norm - 1.0) > 1e-6) {
        throw std::invalid_argument("MomentumQueue: embedding is not unit-norm (|e| = " + std::to_string(norm) + ")");
    }
    Ring& r = rings_[cls];
    std::copy(embedding.begin(), embedding.end(), r.slots.begin() + static_cast<std::ptrdiff_t>(r.next * dim_));
    r.ids[r.next] = sample_id;
    r.next = (r.next + 1) % per_class_;
    r.count = std::min(r.count + 1, per_class_);
}

bool MomentumQueue::weighted_update(std::size_t cls, std::span<const double> embedding, double omega,
                                    std::mt19937_64& rng, std::size_t sample_id) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("weighted_update: omega outside [0, 1]");
    if (cls >= num_classes_) {
        throw std::out_of_range("MomentumQueue: class " + std::to_string(cls) + " out of range");
    }
    if (omega < 1.0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (!(u(rng) < omega)) return false;
    }
    insert(cls, embedding, sample_id);
    return true;
}

std::vector<std::size_t> MomentumQueue::order(const Ring& r) const {
    std::vector<std::size_t> idx(r.count);
    const std::size_t start = r.count < per_class_ ? 0 : r.next;
    for (std::size_t k = 0; k < r.count; ++k) idx[k] = (start + k) % per_class_;
    return idx;
}

Tensor MomentumQueue::positives(std::size_t cls) const {
    const Ring& r = ring(cls);
    Tensor out(r.count, dim_);
    std::size_t row = 0;
    for (std::size_t slot : order(r)) {
        std::copy_n(r.slots.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_, out.row_span(row++).begin());
    }
    return out;
}

NegativeKeys MomentumQueue::negatives(std::size_t cls) const {
    ring(cls);
    std::size_t n = 0;
    for (std::size_t c = 0; c < num_classes_; ++c) n += c == cls ? 0 : rings_[c].count;
    NegativeKeys out{Tensor(n, dim_), {}};
    out.classes.reserve(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes_; ++c) {
        if (c == cls) continue;
        const Ring& r = rings_[c];
        for (std::size_t slot : order(r)) {
            std::copy_n(r.slots.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_,
                        out.keys.row_span(row++).begin());
            out.classes.push_back(c);
        }
    }
    return out;
}

std::span<const double> MomentumQueue::stored(std::size_t cls) const {
    const Ring& r = ring(cls);
    return {r.slots.data(), r.count * dim_};
}

std::vector<std::size_t> MomentumQueue::sample_ids(std::size_t cls) const {
    const Ring& r = ring(cls);
    std::vector<std::size_t> out;
    out.reserve(r.count);
    for (std::size_t slot : order(r)) out.push_back(r.ids[slot]);
    return out;
}

std::size_t MomentumQueue::occupancy(std::size_t cls) const { return ring(cls).count; }

std::size_t MomentumQueue::total_occupancy() const {
    std::size_t n = 0;
    for (const auto& r : rings_) n += r.count;
    return n;
}

void MomentumQueue::clear() {
    for (auto& r : rings_) {
        r.next = 0;
        r.count = 0;
        std::fill(r.ids.begin(), r.ids.end(), kNoSample);
    }
}

}  // namespace snscl::queue
