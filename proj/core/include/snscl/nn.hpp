#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "snscl/autodiff.hpp"

namespace snscl::nn {

/// y = x W + b with W stored [in x out].
class Linear {
public:
    Linear() = default;
    Linear(std::string name, std::size_t in, std::size_t out);

    /// He-uniform weights scaled by `gain`, zero bias.
    void init(std::mt19937_64& rng, double gain = 1.0);

    ad::Var forward(ad::Tape& tape, ad::Var x);
    Tensor forward(const Tensor& x) const;

    std::size_t in_features() const { return weight_.value.rows(); }
    std::size_t out_features() const { return weight_.value.cols(); }

    ad::Parameter& weight() { return weight_; }
    ad::Parameter& bias() { return bias_; }
    const ad::Parameter& weight() const { return weight_; }
    const ad::Parameter& bias() const { return bias_; }

private:
    ad::Parameter weight_;
    ad::Parameter bias_;
};

/// Stack of Linear layers with ReLU between them. `relu_last` also
/// rectifies the final layer's output.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string name, const std::vector<std::size_t>& widths, bool relu_last);

    void init(std::mt19937_64& rng, double last_layer_gain = 1.0);

    ad::Var forward(ad::Tape& tape, ad::Var x);
    Tensor forward(const Tensor& x) const;

    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }
    std::size_t in_features() const { return layers_.front().in_features(); }
    std::size_t out_features() const { return layers_.back().out_features(); }

    /// Appends pointers to every weight and bias, in layer order.
    void collect(std::vector<ad::Parameter*>& out);
    void collect(std::vector<const ad::Parameter*>& out) const;

private:
    std::vector<Linear> layers_;
    bool relu_last_ = false;
};

}  // namespace snscl::nn
