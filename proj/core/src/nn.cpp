#include "snscl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace snscl::nn {

Linear::Linear(std::string name, std::size_t in, std::size_t out)
    : weight_(name + ".weight", Tensor(in, out)), bias_(name + ".bias", Tensor(1, out)) {
    if (in == 0 || out == 0) throw std::invalid_argument("Linear: zero-sized layer " + name);
}

void Linear::init(std::mt19937_64& rng, double gain) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in_features()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : weight_.value.data()) w = u(rng);
    bias_.value.fill(0.0);
}

ad::Var Linear::forward(ad::Tape& tape, ad::Var x) {
    return ad::add_row(ad::matmul(x, tape.param(weight_)), tape.param(bias_));
}

Tensor Linear::forward(const Tensor& x) const {
    Tensor y = snscl::matmul(x, weight_.value);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += bias_.value[c];
    }
    return y;
}

Mlp::Mlp(std::string name, const std::vector<std::size_t>& widths, bool relu_last) : relu_last_(relu_last) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output width");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1]);
    }
}

void Mlp::init(std::mt19937_64& rng, double last_layer_gain) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].init(rng, i + 1 == layers_.size() ? last_layer_gain : 1.0);
    }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i].forward(tape, x);
        if (i + 1 < layers_.size() || relu_last_) x = ad::relu(x);
    }
    return x;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].forward(h);
        if (i + 1 < layers_.size() || relu_last_) {
            for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
        }
    }
    return h;
}

void Mlp::collect(std::vector<ad::Parameter*>& out) {
    for (auto& l : layers_) {
        out.push_back(&l.weight());
        out.push_back(&l.bias());
    }
}

void Mlp::collect(std::vector<const ad::Parameter*>& out) const {
    for (const auto& l : layers_) {
        out.push_back(&l.weight());
        out.push_back(&l.bias());
    }
}

}  // namespace snscl::nn
