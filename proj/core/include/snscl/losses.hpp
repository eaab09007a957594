#pragma once

#include <string>

#include "snscl/autodiff.hpp"

namespace snscl::train {

enum class LossKind { ce, label_smooth, gce };

/// Classification loss plugged into the framework.
struct LossSpec {
    LossKind kind = LossKind::ce;
    double epsilon = 0.1;   // label smoothing
    double q = 0.7;         // generalized cross-entropy exponent
};

std::string to_string(LossKind k);
/// Accepts ce, ls/label_smooth, gce.
LossKind parse_loss_kind(const std::string& s);

/// Batch-mean classification loss against soft targets.
///   ce           -sum_c t_c log p_c
///   label_smooth ce against (1 - eps) t + eps / C
///   gce          (1 - p_y^q) / q with y = argmax t
ad::Var classification_loss(const LossSpec& spec, ad::Var logits, const Tensor& targets);

}  // namespace snscl::train
