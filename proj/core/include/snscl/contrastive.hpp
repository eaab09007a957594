#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "snscl/autodiff.hpp"
#include "snscl/momentum_queue.hpp"

namespace snscl::contrastive {

/// One anchor against a queue snapshot.
struct ContrastiveContext {
    std::span<const double> anchor;   // unit norm
    std::size_t hard_label = 0;
    const queue::MomentumQueue* queue = nullptr;
    double temperature = 0.07;
};

/// Loss of a single anchor and its gradient with respect to the anchor.
struct ContrastTerm {
    double loss = 0.0;
    std::vector<double> grad;   // empty when inactive
    bool active = false;
};

/// Noise-tolerated contrastive term over the weighted queue:
///   L = -(1/P) sum_{p in ring(y)} log( exp(q.k_p/t) / sum_{all stored k} exp(q.k/t) )
/// with P the current occupancy of ring y. Inactive (zero) when ring y is empty.
ContrastTerm ntcl_term(const ContrastiveContext& ctx);

/// Same loss from explicit key sets. Rows of `positives`/`negatives` are keys.
ContrastTerm ntcl_term(std::span<const double> anchor, const Tensor& positives, const Tensor& negatives,
                       double temperature);

/// Differentiable batch mean of precomputed per-anchor terms; inactive terms count as zero.
ad::Var ntcl_from_terms(ad::Var anchors, std::span<const ContrastTerm> terms);

/// Batch NTCL with every anchor evaluated against the same queue snapshot.
ad::Var ntcl_loss(ad::Var anchors, const queue::MomentumQueue& queue, std::span<const std::size_t> hard_labels,
                  double temperature);

/// InfoNCE: -log( exp(q.q+/t) / (exp(q.q+/t) + sum_d exp(q.k_d/t)) ).
double infonce_loss(std::span<const double> anchor, std::span<const double> positive, const Tensor& negatives,
                    double temperature);

/// Supervised contrastive loss inside a batch. For anchor i the positives are
/// the other rows sharing its label and the negatives are the rest:
///   L_i = -log( sum_pos exp(s) / sum_{j != i} exp(s) ),   s = q_i.q_j / t
/// Anchors without a positive contribute 0. Returns the mean over the batch.
ad::Var scl_batch_loss(ad::Var embeddings, std::span<const int> labels, double temperature);
double scl_batch_loss(const Tensor& embeddings, std::span<const int> labels, double temperature);

}  // namespace snscl::contrastive
