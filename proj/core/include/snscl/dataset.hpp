#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snscl/tensor.hpp"

namespace snscl::data {

enum class Split { train, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SampleRecord {
    std::size_t id = 0;
    std::vector<double> features;
    int clean_label = 0;   // hidden ground truth, evaluation only
    int noisy_label = 0;   // observed annotation
};

struct Dataset {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    Split split = Split::train;
    std::vector<SampleRecord> samples;

    std::size_t size() const { return samples.size(); }
};

/// Parameters of the confusable-cluster generator. Classes are grouped into
/// `super_groups` super-clusters whose centers sit roughly `inter_spread`
/// apart; sibling classes share a super-cluster and sit `intra_spread` from
/// its center. Samples are isotropic Gaussians of std `sample_std`.
struct BlobSpec {
    std::size_t num_classes = 10;
    std::size_t dim = 2;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    std::size_t super_groups = 5;
    double intra_spread = 1.0;
    double inter_spread = 8.0;
    double sample_std = 1.0;
    std::uint64_t seed = 0;
};

struct DatasetPair {
    Dataset train;
    Dataset test;
    /// Class centers in the raw (pre-standardization) space, [C x d].
    Tensor class_centers;
};

/// Generates train and test splits, then standardizes both with train
/// per-dimension mean/std. Deterministic under `spec.seed`.
DatasetPair make_fine_grained_blobs(const BlobSpec& spec);

enum class NoiseKind { symmetric, asymmetric };

std::string to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

/// Row-stochastic C x C matrix; entry (i, j) = P(observed j | clean i).
class TransitionMatrix {
public:
    explicit TransitionMatrix(Tensor t);

    std::size_t num_classes() const { return t_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return t_(i, j); }
    const Tensor& matrix() const { return t_; }

private:
    Tensor t_;
};

/// Symmetric: diagonal 1-r, off-diagonal r/(C-1).
/// Asymmetric: diagonal 1-r, entry (c, (c+1) mod C) = r.
TransitionMatrix build_transition(const NoiseSpec& spec, std::size_t num_classes);

struct InjectionResult {
    Dataset dataset;
    std::size_t flipped = 0;
};

/// Resamples every observed label from row T[clean]. Features are untouched.
InjectionResult inject_noise(Dataset dataset, const TransitionMatrix& t, std::uint64_t seed);

/// Fraction of samples whose observed label differs from the clean one.
double empirical_noise_rate(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Views that separate what training may read from the hidden clean labels.
// ---------------------------------------------------------------------------

/// Everything the training path is allowed to see: features and observed labels.
struct TrainingView {
    std::size_t num_classes = 0;
    Tensor features;               // [n x d]
    std::vector<int> labels;       // observed (possibly noisy)
    std::vector<std::size_t> ids;

    std::size_t size() const { return labels.size(); }
};

TrainingView training_view(const Dataset& dataset);

/// Test features with their (clean) labels.
struct EvalView {
    std::size_t num_classes = 0;
    Tensor features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Throws if the split carries injected noise.
EvalView eval_view(const Dataset& test);

/// Hidden clean labels of the training split. Every read is counted so tests
/// can audit which code paths touch ground truth.
class CleanLabelVault {
public:
    explicit CleanLabelVault(const Dataset& train);

    int label(std::size_t index) const;
    std::size_t size() const { return labels_.size(); }
    std::size_t reads() const { return reads_; }

private:
    std::vector<int> labels_;
    mutable std::size_t reads_ = 0;
};

// ---------------------------------------------------------------------------
// CSV: optional leading `#` comment lines, then the header
// `id,split,clean_label,noisy_label,f_0,...,f_{d-1}` and one row per sample.
// ---------------------------------------------------------------------------

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset,
                       const std::vector<std::string>& comments = {});

/// When `num_classes` is empty, it is inferred as max label + 1.
Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace snscl::data
