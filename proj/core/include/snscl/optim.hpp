#pragma once

#include <vector>

#include "snscl/autodiff.hpp"

namespace snscl::optim {

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum, double weight_decay);

/// Heavy-ball SGD over a fixed parameter list. Velocities start at zero.
class Sgd {
public:
    Sgd(std::vector<ad::Parameter*> params, double momentum, double weight_decay);

    void step(double lr);
    void zero_grad();

    const std::vector<ad::Parameter*>& params() const { return params_; }

private:
    std::vector<ad::Parameter*> params_;
    std::vector<Tensor> velocity_;
    double momentum_;
    double weight_decay_;
};

/// Step decay: lr * factor^(number of milestones <= epoch).
double step_lr(double initial, double factor, const std::vector<int>& milestones, int epoch);

}  // namespace snscl::optim
