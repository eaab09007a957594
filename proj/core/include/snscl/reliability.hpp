#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "snscl/dataset.hpp"
#include "snscl/stochastic_encoder.hpp"

namespace snscl::reliability {

/// Per-sample losses, index-aligned with the training set.
struct LossProfile {
    std::vector<double> losses;
    int epoch = 0;
};

/// Cross-entropy of the network's prediction against each observed (noisy)
/// label. Graph-free. When `probabilities` is non-null it receives the
/// softmax outputs [n x C] from the same sweep.
LossProfile collect_losses(const encoder::Network& net, const data::TrainingView& train, int epoch,
                           Tensor* probabilities = nullptr);

/// Min-max scaling into [0, 1]; a constant profile maps to all zeros.
std::vector<double> normalize_losses(std::span<const double> losses);

inline constexpr double kVarianceFloor = 1e-6;
/// Component means closer than this are treated as one population.
inline constexpr double kMinSeparation = 1e-3;

/// Two-component 1D mixture; component 0 has the lower mean ("clean").
struct Gmm2Params {
    double weight[2] = {0.5, 0.5};
    double mean[2] = {0.0, 0.0};
    double variance[2] = {1.0, 1.0};
    bool degenerate = false;
};

struct GmmFit {
    Gmm2Params params;
    std::vector<double> log_likelihood;   // one entry per EM iteration (after each M-step)
    int iterations = 0;
    bool converged = false;
};

struct GmmOptions {
    int max_iter = 100;
    double tol = 1e-4;
};

/// EM from percentile initialization (means at 10th/90th percentile, equal
/// weights, global variance). `seed` is accepted for interface stability; the
/// initialization is deterministic and does not consume randomness.
GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& opts = {}, std::uint64_t seed = 0);

/// Mixture log-likelihood sum_i log sum_k w_k N(x_i; mu_k, var_k).
double log_likelihood(const Gmm2Params& p, std::span<const double> values);

/// Posterior of the low-mean component for each value.
std::vector<double> reliability_scores(const Gmm2Params& p, std::span<const double> values);

/// omega = 1 when gamma > t, otherwise gamma.
std::vector<double> weights_from_scores(std::span<const double> gamma, double t);

struct ReliabilityResult {
    std::vector<double> gamma;
    std::vector<double> omega;
    GmmFit fit;
};

/// normalize -> fit -> score -> weight. A degenerate fit yields gamma = omega = 1.
ReliabilityResult assess(const LossProfile& profile, double threshold, const GmmOptions& opts = {});

}  // namespace snscl::reliability
