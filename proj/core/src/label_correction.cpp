#include "snscl/label_correction.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace snscl::labels {

SoftLabel::SoftLabel(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("SoftLabel: empty");
    double s = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) throw std::invalid_argument("SoftLabel: negative or NaN entry");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument("SoftLabel: sums to " + std::to_string(s));
}

SoftLabel SoftLabel::one_hot(std::size_t num_classes, std::size_t index) {
    if (index >= num_classes) throw std::invalid_argument("SoftLabel::one_hot: index out of range");
    std::vector<double> p(num_classes, 0.0);
    p[index] = 1.0;
    return SoftLabel(std::move(p));
}

SoftLabel weighted_correct(double omega, const SoftLabel& given, const SoftLabel& model) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("weighted_correct: omega outside [0, 1]");
    if (given.size() != model.size()) throw std::invalid_argument("weighted_correct: class count mismatch");
    std::vector<double> out(given.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - omega) * model[c] + omega * given[c];
    return SoftLabel(std::move(out));
}

SoftLabel moving_average_update(const SoftLabel& previous, const SoftLabel& fresh, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("moving_average_update: alpha outside [0, 1]");
    if (previous.size() != fresh.size()) throw std::invalid_argument("moving_average_update: class count mismatch");
    std::vector<double> out(fresh.size());
    double s = 0.0;
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = alpha * previous[c] + (1.0 - alpha) * fresh[c];
        s += out[c];
    }
    for (double& v : out) v /= s;
    return SoftLabel(std::move(out));
}

std::size_t hard_label(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("hard_label: empty label");
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

CorrectionState::CorrectionState(std::size_t num_classes, std::vector<int> observed, Init init)
    : num_classes_(num_classes), observed_(std::move(observed)), init_(init) {
    observed_one_hot_.reserve(observed_.size());
    for (int y : observed_) {
        if (y < 0) throw std::invalid_argument("CorrectionState: negative label");
        observed_one_hot_.push_back(SoftLabel::one_hot(num_classes_, static_cast<std::size_t>(y)));
    }
    average_.resize(observed_.size());
    has_average_.assign(observed_.size(), false);
    use_average_.assign(observed_.size(), false);
}

void CorrectionState::refurbish(std::span<const double> omega, std::span<const double> model_probs, double alpha) {
    const std::size_t n = observed_.size();
    if (omega.size() != n || model_probs.size() != n * num_classes_) {
        throw std::invalid_argument("CorrectionState::refurbish: size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (omega[i] == 1.0) {
            use_average_[i] = false;
            continue;
        }
        const auto row = model_probs.subspan(i * num_classes_, num_classes_);
        // Renormalize the model row so float round-off never trips the SoftLabel check.
        double s = 0.0;
        for (double p : row) s += p;
        std::vector<double> pred(row.begin(), row.end());
        for (double& p : pred) p /= s;
        const SoftLabel fresh = weighted_correct(omega[i], observed_one_hot_[i], SoftLabel(std::move(pred)));
        if (has_average_[i]) {
            average_[i] = moving_average_update(average_[i], fresh, alpha);
        } else if (init_ == Init::first_correction) {
            average_[i] = fresh;
        } else {
            average_[i] = moving_average_update(observed_one_hot_[i], fresh, alpha);
        }
        has_average_[i] = true;
        use_average_[i] = true;
    }
}

const SoftLabel& CorrectionState::target(std::size_t i) const {
    return use_average_.at(i) ? average_[i] : observed_one_hot_[i];
}

std::size_t CorrectionState::corrected_count() const {
    std::size_t k = 0;
    for (bool u : use_average_) k += u ? 1 : 0;
    return k;
}

}  // namespace snscl::labels
