#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snscl/dataset.hpp"
#include "snscl/label_correction.hpp"
#include "snscl/losses.hpp"
#include "snscl/momentum_queue.hpp"
#include "snscl/optim.hpp"
#include "snscl/reliability.hpp"
#include "snscl/stochastic_encoder.hpp"

namespace snscl::train {

/// Component switches; all on is the full method.
struct Ablation {
    bool weight_correction = true;
    bool weight_update = true;
    bool stochastic_module = true;
    /// Replace the queue-based loss by in-batch supervised contrastive
    /// learning on observed labels, with no weighting ("CE + SCL").
    bool plain_scl = false;
};

struct TrainingConfig {
    int epochs = 55;                  // main-loop epochs after warmup
    int warmup_epochs = 5;
    std::size_t batch_size = 32;
    double lr = 0.01;
    double lr_decay = 0.1;
    std::vector<int> lr_milestones{20, 40};   // counted in global epochs (warmup included)
    double momentum = 0.9;
    double weight_decay = 1e-3;

    double threshold = 0.5;           // t
    std::size_t queue_size = 32;      // D
    double temperature = 0.07;        // tau
    double alpha = 0.99;              // moving-average coefficient
    double lambda_ntcl = 1.0;
    double lambda_kl = 0.001;

    std::uint64_t seed = 0;
    LossSpec lnl;
    /// false trains the classification loss alone (the baseline).
    bool snscl = true;
    Ablation ablation;
    labels::CorrectionState::Init correction_init = labels::CorrectionState::Init::first_correction;

    std::vector<std::size_t> backbone_hidden{64, 64};
    std::size_t embed_dim = 32;
    std::vector<std::size_t> stochastic_hidden{32, 32};
    // Random Fourier input lift; gives the 2-D backbone enough capacity to
    // memorize label noise, which a plain MLP on raw coordinates cannot.
    std::size_t fourier_features = 128;
    double fourier_scale = 3.0;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;                    // 1-based global epoch
    double lr = 0.0;
    double train_loss = 0.0;          // batch mean of the total objective
    double lnl_loss = 0.0;
    double ntcl_loss = 0.0;           // contrastive term (NTCL or in-batch SCL)
    double kl_loss = 0.0;
    double test_acc = 0.0;
    // Diagnostics below need the clean-label vault; NaN without it.
    double corrected_label_acc = 0.0;
    double clean_recall = 0.0;        // share of truly clean samples with omega == 1
    double mean_gamma_clean = 0.0;
    double mean_gamma_noisy = 0.0;
    std::size_t corrected_samples = 0;
    std::vector<std::size_t> queue_occupancy;
};

struct RunResult {
    std::vector<EpochMetrics> history;
    double warmup_acc = 0.0;
    double best_acc = 0.0;
    double last_acc = 0.0;
};

/// Loss components of the most recent batch, before weighting.
struct BatchTerms {
    double total = 0.0;
    double lnl = 0.0;
    double ntcl = 0.0;
    double kl = 0.0;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Top-1 accuracy of argmax predictions.
double evaluate(const encoder::Network& net, const data::EvalView& test);

/// Runs warmup then the main loop: per epoch, reliability fitting on the
/// observed labels, label refurbishment, then minibatch SGD on
/// L_LNL + lambda_ntcl * L_NTCL + lambda_kl * L_KL.
///
/// The trainer reads the observed labels from `train` only. The optional
/// vault is consulted solely for diagnostic metrics.
class Trainer {
public:
    Trainer(TrainingConfig cfg, const data::TrainingView& train, const data::EvalView& test,
            const data::CleanLabelVault* diagnostics = nullptr);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    void warmup();
    EpochMetrics run_epoch();
    RunResult run();

    /// Stream receiving `epoch,sample_id,loss,gamma,omega` rows (header written on attach).
    void set_reliability_dump(std::ostream* out);

    const encoder::Network& network() const { return net_; }
    encoder::Network& network() { return net_; }
    const queue::MomentumQueue& queue() const { return queue_; }
    const labels::CorrectionState& correction() const { return correction_; }
    const reliability::LossProfile& last_profile() const { return profile_; }
    const reliability::ReliabilityResult& last_reliability() const { return reliab_; }
    const BatchTerms& last_batch() const { return last_batch_; }
    int epochs_done() const { return epoch_; }
    const TrainingConfig& config() const { return cfg_; }
    bool warmed_up() const { return warmed_up_; }

    /// Hard training target of sample i (corrected label when correction is active).
    std::size_t hard_target(std::size_t i) const;

private:
    struct EpochTotals {
        double total = 0.0, lnl = 0.0, ntcl = 0.0, kl = 0.0;
        std::size_t batches = 0;
    };

    void train_epoch(bool main_phase, EpochTotals& totals);
    void train_batch(std::span<const std::size_t> idx, bool main_phase, EpochTotals& totals);
    Tensor targets_for(std::span<const std::size_t> idx) const;
    void refresh_reliability();
    void fill_diagnostics(EpochMetrics& m) const;
    double current_lr() const;

    TrainingConfig cfg_;
    const data::TrainingView& train_;
    const data::EvalView& test_;
    const data::CleanLabelVault* vault_;

    std::mt19937_64 rng_;
    encoder::Network net_;
    optim::Sgd sgd_;
    queue::MomentumQueue queue_;
    labels::CorrectionState correction_;
    reliability::LossProfile profile_;
    reliability::ReliabilityResult reliab_;
    BatchTerms last_batch_;
    std::ostream* dump_ = nullptr;
    int epoch_ = 0;   // global epochs completed
    bool warmed_up_ = false;
};

/// Convenience: full run on a train/test pair.
RunResult run(const TrainingConfig& cfg, const data::TrainingView& train, const data::EvalView& test,
              const data::CleanLabelVault* diagnostics = nullptr);

/// Metrics CSV with header
/// `epoch,train_loss,lnl_loss,ntcl_loss,kl_loss,test_acc,corrected_label_acc,clean_recall,mean_gamma_clean,mean_gamma_noisy`
/// preceded by optional `#` comment lines.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history,
                       const std::vector<std::string>& comments = {});

}  // namespace snscl::train
