#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "snscl/autodiff.hpp"
#include "snscl/nn.hpp"

namespace snscl::encoder {

/// Lower bound added to the softplus scale.
inline constexpr double kSigmaFloor = 1e-6;

struct NetworkConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> backbone_hidden{64, 64};   // last entry is the feature width
    std::size_t num_classes = 10;
    std::size_t embed_dim = 32;                          // projector output and embedding width
    std::vector<std::size_t> stochastic_hidden{32, 32};  // two hidden layers + output = three layers
    /// Fixed random Fourier lift x -> [cos(2 pi B x), sin(2 pi B x)] ahead of
    /// the backbone MLP, B ~ N(0, scale^2) with `fourier_features` rows. 0 disables it.
    std::size_t fourier_features = 0;
    double fourier_scale = 1.0;
};

/// Batch of diagonal Gaussians N(mean, stddev^2), one row per sample.
struct GaussianEmbedding {
    ad::Var mean;
    ad::Var stddev;
};

/// Backbone f(x) -> z feeding two branches: a linear classifier head on z,
/// and projector (one layer) -> stochastic module (three layers) -> (mu, sigma).
class Network {
public:
    Network() = default;
    explicit Network(const NetworkConfig& cfg);

    void init(std::mt19937_64& rng);

    ad::Var backbone(ad::Tape& tape, ad::Var x);
    ad::Var classify(ad::Tape& tape, ad::Var z);
    ad::Var project(ad::Tape& tape, ad::Var z);
    GaussianEmbedding encode(ad::Tape& tape, ad::Var z);

    /// Graph-free inference path.
    Tensor backbone(const Tensor& x) const;
    /// Input lift (identity when disabled). Not differentiated: inputs are data.
    Tensor lift(const Tensor& x) const;
    Tensor logits(const Tensor& x) const;

    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;
    /// Backbone and classifier head only.
    std::vector<const ad::Parameter*> classifier_parameters() const;

    const NetworkConfig& config() const { return cfg_; }
    nn::Mlp& backbone_mlp() { return backbone_; }
    nn::Linear& head() { return head_; }
    nn::Linear& projector() { return projector_; }
    nn::Mlp& stochastic_module() { return stochastic_; }

private:
    NetworkConfig cfg_;
    Tensor fourier_;   // [fourier_features x input_dim]
    nn::Mlp backbone_;
    nn::Linear head_;
    nn::Linear projector_;
    nn::Mlp stochastic_;
};

/// z' = mean + eps * stddev (reparameterization); eps has the embedding's shape.
ad::Var sample(const GaussianEmbedding& ge, const Tensor& eps);

Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// KL(N(mu, diag sigma^2) || N(0, I)) summed over dimensions, averaged over rows.
ad::Var kl_to_unit(const GaussianEmbedding& ge);
/// Single-sample KL on plain vectors.
double kl_to_unit(std::span<const double> mean, std::span<const double> stddev);

// Checkpoint container, text format:
//   # optional comment lines
//   snscl-checkpoint 1
//   <count>
//   <name> <rows> <cols>
//   <rows*cols values, hexfloat, space separated>
//   ...
void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const std::vector<std::string>& comments = {});
/// Names and shapes must match the network's parameters.
void load_checkpoint(const std::filesystem::path& path, Network& net);

}  // namespace snscl::encoder
