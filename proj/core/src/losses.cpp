#include "snscl/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "snscl/label_correction.hpp"

namespace snscl::train {

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::ce: return "ce";
        case LossKind::label_smooth: return "ls";
        case LossKind::gce: return "gce";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& s) {
    if (s == "ce") return LossKind::ce;
    if (s == "ls" || s == "label_smooth") return LossKind::label_smooth;
    if (s == "gce") return LossKind::gce;
    throw std::invalid_argument("unknown classification loss '" + s + "' (expected ce, ls or gce)");
}

namespace {

ad::Var gce_loss(ad::Var logits, const Tensor& targets, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("gce: q must lie in (0, 1]");
    const Tensor p = ad::softmax_rows(logits.value());
    const std::size_t batch = p.rows();
    Tensor grad(p.rows(), p.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t y = labels::hard_label(targets.row_span(r));
        const double py_q = std::pow(p(r, y), q);
        total += (1.0 - py_q) / q;
        // d/dz_k [(1 - p_y^q)/q] = -p_y^q (delta_ky - p_k)
        for (std::size_t k = 0; k < p.cols(); ++k) {
            grad(r, k) = -py_q * ((k == y ? 1.0 : 0.0) - p(r, k)) / static_cast<double>(batch);
        }
    }
    return ad::external_scalar(logits, total / static_cast<double>(batch), std::move(grad));
}

}  // namespace

ad::Var classification_loss(const LossSpec& spec, ad::Var logits, const Tensor& targets) {
    if (!targets.same_shape(logits.value())) {
        throw std::invalid_argument("classification_loss: targets " + targets.shape_string() + " vs logits " +
                                    logits.value().shape_string());
    }
    switch (spec.kind) {
        case LossKind::ce: return ad::softmax_cross_entropy(logits, targets).loss;
        case LossKind::label_smooth: {
            if (!(spec.epsilon >= 0.0 && spec.epsilon <= 1.0)) {
                throw std::invalid_argument("label_smooth: epsilon outside [0, 1]");
            }
            Tensor smooth = targets;
            const double u = spec.epsilon / static_cast<double>(targets.cols());
            for (double& v : smooth.data()) v = (1.0 - spec.epsilon) * v + u;
            return ad::softmax_cross_entropy(logits, smooth).loss;
        }
        case LossKind::gce: return gce_loss(logits, targets, spec.q);
    }
    throw std::invalid_argument("classification_loss: unknown kind");
}

}  // namespace snscl::train
