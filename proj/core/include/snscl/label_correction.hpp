#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace snscl::labels {

/// Probability vector over classes.
class SoftLabel {
public:
    SoftLabel() = default;
    /// Throws unless entries are non-negative and sum to 1 within 1e-6.
    explicit SoftLabel(std::vector<double> probs);

    static SoftLabel one_hot(std::size_t num_classes, std::size_t index);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::span<const double> probs() const { return probs_; }

    bool operator==(const SoftLabel&) const = default;

private:
    std::vector<double> probs_;
};

/// y_hat = (1 - omega) * y_model + omega * y_given
SoftLabel weighted_correct(double omega, const SoftLabel& given, const SoftLabel& model);

/// alpha * previous + (1 - alpha) * fresh, renormalized.
SoftLabel moving_average_update(const SoftLabel& previous, const SoftLabel& fresh, double alpha);

/// argmax; ties go to the lowest index.
std::size_t hard_label(std::span<const double> probs);
inline std::size_t hard_label(const SoftLabel& y) { return hard_label(y.probs()); }

/// Per-sample corrected-label state carried across epochs.
///
/// Training targets are the observed one-hot labels until a sample first
/// receives a correction (omega != 1). Samples with omega == 1 in a given
/// epoch train on their observed label and leave the moving-average state
/// untouched.
class CorrectionState {
public:
    enum class Init {
        /// The first correction seeds the moving average directly.
        first_correction,
        /// The moving average starts from the observed one-hot label.
        observed_label,
    };

    CorrectionState(std::size_t num_classes, std::vector<int> observed, Init init = Init::first_correction);

    /// One refurbish round. `model_probs` is row-major [n x C].
    void refurbish(std::span<const double> omega, std::span<const double> model_probs, double alpha);

    /// Current training target for sample i.
    const SoftLabel& target(std::size_t i) const;
    std::size_t hard(std::size_t i) const { return hard_label(target(i)); }
    std::size_t size() const { return observed_.size(); }
    std::size_t num_classes() const { return num_classes_; }
    /// Number of samples currently training on a corrected (non-observed) target.
    std::size_t corrected_count() const;

private:
    std::size_t num_classes_;
    std::vector<int> observed_;
    std::vector<SoftLabel> observed_one_hot_;
    std::vector<SoftLabel> average_;
    std::vector<bool> has_average_;
    std::vector<bool> use_average_;
    Init init_;
};

}  // namespace snscl::labels
