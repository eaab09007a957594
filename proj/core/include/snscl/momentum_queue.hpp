#pragma once

#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "snscl/tensor.hpp"

namespace snscl::queue {

inline constexpr std::size_t kNoSample = std::numeric_limits<std::size_t>::max();

/// Keys of every class except one, with the class each row came from.
struct NegativeKeys {
    Tensor keys;                       // [N x dim]
    std::vector<std::size_t> classes;  // length N
};

/// C ring buffers of unit-norm embeddings, D slots each. Entries are plain
/// values: nothing stored here participates in a gradient.
class MomentumQueue {
public:
    MomentumQueue(std::size_t num_classes, std::size_t per_class, std::size_t dim);

    /// Unconditional FIFO insert into ring `cls`. `sample_id` is kept for diagnostics.
    void insert(std::size_t cls, std::span<const double> embedding, std::size_t sample_id = kNoSample);

    /// Inserts when omega == 1; otherwise draws u ~ U[0,1) from `rng` and
    /// inserts iff u < omega. Returns whether the entry went in.
    bool weighted_update(std::size_t cls, std::span<const double> embedding, double omega, std::mt19937_64& rng,
                         std::size_t sample_id = kNoSample);

    /// Ring `cls`, oldest first, [P x dim].
    Tensor positives(std::size_t cls) const;
    /// All other rings, each oldest first, in class order.
    NegativeKeys negatives(std::size_t cls) const;

    /// Stored rows of ring `cls` in slot order (not FIFO order); count*dim values.
    std::span<const double> stored(std::size_t cls) const;
    /// Sample ids of ring `cls`, oldest first.
    std::vector<std::size_t> sample_ids(std::size_t cls) const;

    std::size_t occupancy(std::size_t cls) const;
    std::size_t total_occupancy() const;
    std::size_t capacity() const { return num_classes_ * per_class_; }
    std::size_t per_class_capacity() const { return per_class_; }
    std::size_t num_classes() const { return num_classes_; }
    std::size_t dim() const { return dim_; }

    void clear();

private:
    struct Ring {
        std::vector<double> slots;        // per_class * dim
        std::vector<std::size_t> ids;     // per_class
        std::size_t next = 0;             // slot written by the next insert
        std::size_t count = 0;
    };

    const Ring& ring(std::size_t cls) const;
    /// Slot indices of a ring, oldest first.
    std::vector<std::size_t> order(const Ring& r) const;

    std::size_t num_classes_;
    std::size_t per_class_;
    std::size_t dim_;
    std::vector<Ring> rings_;
};

}  // namespace snscl::queue
