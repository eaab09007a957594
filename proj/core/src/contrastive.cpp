#include "snscl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace snscl::contrastive {

namespace {

void check_temperature(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("contrastive: temperature must be positive");
}

void check_unit(std::span<const double> q) {
    const double n = l2_norm(q);
    if (std::abs(n - 1.0) > 1e-6) {
        throw std::invalid_argument("contrastive: anchor is not unit-norm (|q| = " + std::to_string(n) + ")");
    }
}

/// Key blocks: `rows` keys of width dim laid out contiguously, flagged positive or not.
struct KeyBlock {
    std::span<const double> data;
    bool positive;
};

ContrastTerm term_over_blocks(std::span<const double> q, std::span<const KeyBlock> blocks, double temperature) {
    const std::size_t dim = q.size();
    std::size_t total = 0, positives = 0;
    for (const auto& b : blocks) {
        if (b.data.size() % dim != 0) throw std::invalid_argument("contrastive: key width differs from anchor");
        total += b.data.size() / dim;
        if (b.positive) positives += b.data.size() / dim;
    }
    ContrastTerm out;
    if (positives == 0) return out;

    std::vector<double> s;
    s.reserve(total);
    double m = -std::numeric_limits<double>::infinity();
    double pos_sum = 0.0;
    for (const auto& b : blocks) {
        for (std::size_t off = 0; off < b.data.size(); off += dim) {
            const double v = dot(q, b.data.subspan(off, dim)) / temperature;
            s.push_back(v);
            m = std::max(m, v);
            if (b.positive) pos_sum += v;
        }
    }
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    const double lse = m + std::log(z);
    const double p = static_cast<double>(positives);
    out.loss = lse - pos_sum / p;
    out.active = true;

    // dL/ds_j = softmax_j - [j positive]/P ;  dL/dq = sum_j dL/ds_j k_j / t
    out.grad.assign(dim, 0.0);
    std::size_t j = 0;
    for (const auto& b : blocks) {
        for (std::size_t off = 0; off < b.data.size(); off += dim, ++j) {
            const double g = (std::exp(s[j] - lse) - (b.positive ? 1.0 / p : 0.0)) / temperature;
            for (std::size_t k = 0; k < dim; ++k) out.grad[k] += g * b.data[off + k];
        }
    }
    return out;
}

}  // namespace

ContrastTerm ntcl_term(const ContrastiveContext& ctx) {
    check_temperature(ctx.temperature);
    if (ctx.queue == nullptr) throw std::invalid_argument("ntcl_term: no queue");
    const auto& queue = *ctx.queue;
    if (ctx.anchor.size() != queue.dim()) throw std::invalid_argument("ntcl_term: anchor width differs from queue");
    if (ctx.hard_label >= queue.num_classes()) throw std::out_of_range("ntcl_term: label out of range");
    check_unit(ctx.anchor);
    std::vector<KeyBlock> blocks;
    blocks.reserve(queue.num_classes());
    for (std::size_t c = 0; c < queue.num_classes(); ++c) blocks.push_back({queue.stored(c), c == ctx.hard_label});
    return term_over_blocks(ctx.anchor, blocks, ctx.temperature);
}

ContrastTerm ntcl_term(std::span<const double> anchor, const Tensor& positives, const Tensor& negatives,
                       double temperature) {
    check_temperature(temperature);
    check_unit(anchor);
    const KeyBlock blocks[] = {{positives.data(), true}, {negatives.data(), false}};
    return term_over_blocks(anchor, blocks, temperature);
}

ad::Var ntcl_from_terms(ad::Var anchors, std::span<const ContrastTerm> terms) {
    const Tensor& q = anchors.value();
    if (terms.size() != q.rows()) throw std::invalid_argument("ntcl_from_terms: one term per anchor row required");
    const double batch = static_cast<double>(q.rows());
    Tensor grad(q.rows(), q.cols());
    double total = 0.0;
    for (std::size_t b = 0; b < terms.size(); ++b) {
        if (!terms[b].active) continue;
        total += terms[b].loss;
        for (std::size_t k = 0; k < q.cols(); ++k) grad(b, k) = terms[b].grad[k] / batch;
    }
    return ad::external_scalar(anchors, total / batch, std::move(grad));
}

ad::Var ntcl_loss(ad::Var anchors, const queue::MomentumQueue& queue, std::span<const std::size_t> hard_labels,
                  double temperature) {
    const Tensor& q = anchors.value();
    if (hard_labels.size() != q.rows()) throw std::invalid_argument("ntcl_loss: one label per anchor required");
    std::vector<ContrastTerm> terms;
    terms.reserve(q.rows());
    for (std::size_t b = 0; b < q.rows(); ++b) {
        terms.push_back(ntcl_term({q.row_span(b), hard_labels[b], &queue, temperature}));
    }
    return ntcl_from_terms(anchors, terms);
}

double infonce_loss(std::span<const double> anchor, std::span<const double> positive, const Tensor& negatives,
                    double temperature) {
    check_temperature(temperature);
    if (positive.size() != anchor.size() || (negatives.size() > 0 && negatives.cols() != anchor.size())) {
        throw std::invalid_argument("infonce_loss: key width differs from anchor");
    }
    const double a = dot(anchor, positive) / temperature;
    std::vector<double> s{a};
    for (std::size_t d = 0; d < negatives.rows(); ++d) s.push_back(dot(anchor, negatives.row_span(d)) / temperature);
    const double m = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    return m + std::log(z) - a;
}

namespace {

struct SclEval {
    double loss = 0.0;
    Tensor grad;
};

SclEval scl_eval(const Tensor& e, std::span<const int> labels, double temperature) {
    check_temperature(temperature);
    const std::size_t n = e.rows();
    const std::size_t dim = e.cols();
    if (labels.size() != n) throw std::invalid_argument("scl_batch_loss: one label per row required");
    if (n < 2) throw std::invalid_argument("scl_batch_loss: batch needs at least two rows");
    SclEval out{0.0, Tensor(n, dim)};
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool any_pos = false;
        double m_all = -std::numeric_limits<double>::infinity();
        double m_pos = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            s[j] = dot(e.row_span(i), e.row_span(j)) / temperature;
            m_all = std::max(m_all, s[j]);
            if (labels[j] == labels[i]) {
                any_pos = true;
                m_pos = std::max(m_pos, s[j]);
            }
        }
        if (!any_pos) continue;
        double z_all = 0.0, z_pos = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            z_all += std::exp(s[j] - m_all);
            if (labels[j] == labels[i]) z_pos += std::exp(s[j] - m_pos);
        }
        const double lse_all = m_all + std::log(z_all);
        const double lse_pos = m_pos + std::log(z_pos);
        out.loss += lse_all - lse_pos;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double g = std::exp(s[j] - lse_all);
            if (labels[j] == labels[i]) g -= std::exp(s[j] - lse_pos);
            g /= temperature;
            for (std::size_t k = 0; k < dim; ++k) {
                out.grad(i, k) += g * e(j, k);
                out.grad(j, k) += g * e(i, k);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.loss *= inv;
    for (double& g : out.grad.data()) g *= inv;
    return out;
}

}  // namespace

double scl_batch_loss(const Tensor& embeddings, std::span<const int> labels, double temperature) {
    return scl_eval(embeddings, labels, temperature).loss;
}

ad::Var scl_batch_loss(ad::Var embeddings, std::span<const int> labels, double temperature) {
    SclEval ev = scl_eval(embeddings.value(), labels, temperature);
    return ad::external_scalar(embeddings, ev.loss, std::move(ev.grad));
}

}  // namespace snscl::contrastive
