#include "snscl/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace snscl::reliability {

LossProfile collect_losses(const encoder::Network& net, const data::TrainingView& train, int epoch,
                           Tensor* probabilities) {
    constexpr std::size_t kChunk = 512;
    const std::size_t n = train.size();
    const std::size_t c = train.num_classes;
    const std::size_t d = train.features.cols();
    LossProfile profile;
    profile.epoch = epoch;
    profile.losses.resize(n);
    if (probabilities != nullptr) *probabilities = Tensor(n, c);

    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t rows = std::min(kChunk, n - start);
        Tensor x(rows, d);
        std::copy_n(train.features.data().begin() + static_cast<std::ptrdiff_t>(start * d), rows * d,
                    x.data().begin());
        const Tensor logits = net.logits(x);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = logits.row_span(r);
            const double m = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (double v : row) z += std::exp(v - m);
            const double lse = m + std::log(z);
            profile.losses[start + r] = lse - row[static_cast<std::size_t>(train.labels[start + r])];
            if (probabilities != nullptr) {
                for (std::size_t k = 0; k < c; ++k) (*probabilities)(start + r, k) = std::exp(row[k] - lse);
            }
        }
    }
    return profile;
}

std::vector<double> normalize_losses(std::span<const double> losses) {
    if (losses.empty()) throw std::invalid_argument("normalize_losses: empty profile");
    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    const double range = *hi - *lo;
    std::vector<double> out(losses.size(), 0.0);
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < losses.size(); ++i) out[i] = (losses[i] - *lo) / range;
    return out;
}

namespace {

double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double percentile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// log(w0 N0 + w1 N1) and the posterior of component 0.
std::pair<double, double> mix(const Gmm2Params& p, double x) {
    const double a = std::log(p.weight[0]) + log_normal_pdf(x, p.mean[0], p.variance[0]);
    const double b = std::log(p.weight[1]) + log_normal_pdf(x, p.mean[1], p.variance[1]);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    return {lse, std::exp(a - lse)};
}

}  // namespace

double log_likelihood(const Gmm2Params& p, std::span<const double> values) {
    double ll = 0.0;
    for (double x : values) ll += mix(p, x).first;
    return ll;
}

GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& opts, std::uint64_t /*seed*/) {
    GmmFit fit;
    if (values.empty()) throw std::invalid_argument("fit_gmm2: no values");
    const double n = static_cast<double>(values.size());
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    double mu = 0.0;
    for (double x : values) mu += x;
    mu /= n;
    double var = 0.0;
    for (double x : values) var += (x - mu) * (x - mu);
    var /= n;

    Gmm2Params& p = fit.params;
    if (sorted.front() == sorted.back()) {
        p.mean[0] = p.mean[1] = sorted.front();
        p.variance[0] = p.variance[1] = kVarianceFloor;
        p.degenerate = true;
        return fit;
    }

    p.mean[0] = percentile(sorted, 0.1);
    p.mean[1] = percentile(sorted, 0.9);
    p.variance[0] = p.variance[1] = std::max(var, kVarianceFloor);

    std::vector<double> resp(values.size());
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iter; ++it) {
        // E-step
        for (std::size_t i = 0; i < values.size(); ++i) resp[i] = mix(p, values[i]).second;
        // M-step
        double r0 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            r0 += resp[i];
            s0 += resp[i] * values[i];
            s1 += (1.0 - resp[i]) * values[i];
        }
        const double r1 = n - r0;
        // A component that loses all responsibility keeps its previous mean.
        if (r0 > 0.0) p.mean[0] = s0 / r0;
        if (r1 > 0.0) p.mean[1] = s1 / r1;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            v0 += resp[i] * (values[i] - p.mean[0]) * (values[i] - p.mean[0]);
            v1 += (1.0 - resp[i]) * (values[i] - p.mean[1]) * (values[i] - p.mean[1]);
        }
        p.variance[0] = std::max(r0 > 0.0 ? v0 / r0 : kVarianceFloor, kVarianceFloor);
        p.variance[1] = std::max(r1 > 0.0 ? v1 / r1 : kVarianceFloor, kVarianceFloor);
        p.weight[0] = std::clamp(r0 / n, 1e-12, 1.0 - 1e-12);
        p.weight[1] = 1.0 - p.weight[0];

        const double ll = log_likelihood(p, values);
        fit.log_likelihood.push_back(ll);
        fit.iterations = it + 1;
        if (ll - prev_ll < opts.tol) {
            fit.converged = true;
            break;
        }
        prev_ll = ll;
    }

    if (p.mean[0] > p.mean[1]) {
        std::swap(p.mean[0], p.mean[1]);
        std::swap(p.variance[0], p.variance[1]);
        std::swap(p.weight[0], p.weight[1]);
    }
    p.degenerate = p.mean[1] - p.mean[0] < kMinSeparation;
    return fit;
}

std::vector<double> reliability_scores(const Gmm2Params& p, std::span<const double> values) {
    std::vector<double> gamma(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) gamma[i] = mix(p, values[i]).second;
    return gamma;
}

std::vector<double> weights_from_scores(std::span<const double> gamma, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("weights_from_scores: threshold outside [0, 1]");
    std::vector<double> omega(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) omega[i] = gamma[i] > t ? 1.0 : gamma[i];
    return omega;
}

ReliabilityResult assess(const LossProfile& profile, double threshold, const GmmOptions& opts) {
    ReliabilityResult out;
    const auto normalized = normalize_losses(profile.losses);
    out.fit = fit_gmm2(normalized, opts);
    if (out.fit.params.degenerate) {
        out.gamma.assign(normalized.size(), 1.0);
        out.omega.assign(normalized.size(), 1.0);
        return out;
    }
    out.gamma = reliability_scores(out.fit.params, normalized);
    out.omega = weights_from_scores(out.gamma, threshold);
    return out;
}

}  // namespace snscl::reliability
