#include "snscl/optim.hpp"

#include <stdexcept>

namespace snscl::optim {

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum, double weight_decay) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
    if (!param.same_shape(grad) || !param.same_shape(velocity)) {
        throw std::invalid_argument("sgd_step: shape mismatch param " + param.shape_string() + " grad " +
                                    grad.shape_string() + " velocity " + velocity.shape_string());
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

Sgd::Sgd(std::vector<ad::Parameter*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(params_.size());
    for (const auto* p : params_) velocity_.emplace_back(p->value.rows(), p->value.cols());
}

void Sgd::step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        sgd_step(params_[i]->value, params_[i]->grad, velocity_[i], lr, momentum_, weight_decay_);
    }
}

void Sgd::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

double step_lr(double initial, double factor, const std::vector<int>& milestones, int epoch) {
    double lr = initial;
    for (int m : milestones) {
        if (epoch >= m) lr *= factor;
    }
    return lr;
}

}  // namespace snscl::optim
