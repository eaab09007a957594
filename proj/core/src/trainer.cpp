#include "snscl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "snscl/contrastive.hpp"
#include "snscl/text.hpp"

namespace snscl::train {

void TrainingConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("training config: " + what); };
    if (epochs < 0) fail("epochs must be >= 0");
    if (warmup_epochs < 0) fail("warmup_epochs must be >= 0");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(lr > 0.0)) fail("lr must be positive");
    if (!(lr_decay > 0.0)) fail("lr_decay must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0, 1]");
    if (queue_size == 0) fail("queue_size must be positive");
    if (!(temperature > 0.0)) fail("temperature must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
    if (!(lambda_ntcl >= 0.0) || !(lambda_kl >= 0.0)) fail("lambda weights must be >= 0");
    if (backbone_hidden.empty()) fail("backbone needs at least one hidden layer");
    if (stochastic_hidden.size() != 2) fail("stochastic module has exactly two hidden widths");
    if (embed_dim == 0) fail("embed_dim must be positive");
    if (fourier_features > 0 && !(fourier_scale > 0.0)) fail("fourier_scale must be positive");
    if (lnl.kind == LossKind::gce && !(lnl.q > 0.0 && lnl.q <= 1.0)) fail("gce q must lie in (0, 1]");
    if (lnl.kind == LossKind::label_smooth && !(lnl.epsilon >= 0.0 && lnl.epsilon <= 1.0)) {
        fail("label smoothing epsilon must lie in [0, 1]");
    }
}

double evaluate(const encoder::Network& net, const data::EvalView& test) {
    if (test.size() == 0) return 0.0;
    const Tensor logits = net.logits(test.features);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (labels::hard_label(logits.row_span(r)) == static_cast<std::size_t>(test.labels[r])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace {

encoder::NetworkConfig network_config(const TrainingConfig& cfg, const data::TrainingView& train) {
    encoder::NetworkConfig nc;
    nc.input_dim = train.features.cols();
    nc.backbone_hidden = cfg.backbone_hidden;
    nc.num_classes = train.num_classes;
    nc.embed_dim = cfg.embed_dim;
    nc.stochastic_hidden = cfg.stochastic_hidden;
    nc.fourier_features = cfg.fourier_features;
    nc.fourier_scale = cfg.fourier_scale;
    return nc;
}

const TrainingConfig& validated(const TrainingConfig& cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

Trainer::Trainer(TrainingConfig cfg, const data::TrainingView& train, const data::EvalView& test,
                 const data::CleanLabelVault* diagnostics)
    : cfg_(validated(cfg)),
      train_(train),
      test_(test),
      vault_(diagnostics),
      rng_(cfg_.seed),
      net_(network_config(cfg_, train)),
      sgd_(net_.parameters(), cfg_.momentum, cfg_.weight_decay),
      queue_(train.num_classes, cfg_.queue_size, cfg_.embed_dim),
      correction_(train.num_classes, train.labels, cfg_.correction_init) {
    if (train.size() == 0) throw std::invalid_argument("Trainer: empty training set");
    if (test.num_classes != train.num_classes) throw std::invalid_argument("Trainer: class count differs across splits");
    if (vault_ != nullptr && vault_->size() != train.size()) {
        throw std::invalid_argument("Trainer: diagnostics vault does not match the training set");
    }
    net_.init(rng_);
    reliab_.gamma.assign(train.size(), 1.0);
    reliab_.omega.assign(train.size(), 1.0);
}

void Trainer::set_reliability_dump(std::ostream* out) {
    dump_ = out;
    if (dump_ != nullptr) *dump_ << "epoch,sample_id,loss,gamma,omega\n";
}

double Trainer::current_lr() const { return optim::step_lr(cfg_.lr, cfg_.lr_decay, cfg_.lr_milestones, epoch_); }

std::size_t Trainer::hard_target(std::size_t i) const { return correction_.hard(i); }

Tensor Trainer::targets_for(std::span<const std::size_t> idx) const {
    Tensor t(idx.size(), train_.num_classes);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto probs = correction_.target(idx[b]).probs();
        std::copy(probs.begin(), probs.end(), t.row_span(b).begin());
    }
    return t;
}

void Trainer::warmup() {
    if (warmed_up_) throw std::logic_error("Trainer::warmup: already warmed up");
    for (int e = 0; e < cfg_.warmup_epochs; ++e) {
        EpochTotals totals;
        train_epoch(false, totals);
        ++epoch_;
    }
    warmed_up_ = true;
}

void Trainer::refresh_reliability() {
    Tensor probs;
    profile_ = reliability::collect_losses(net_, train_, epoch_ + 1, &probs);
    reliab_ = reliability::assess(profile_, cfg_.threshold);
    if (dump_ != nullptr) {
        for (std::size_t i = 0; i < train_.size(); ++i) {
            *dump_ << epoch_ + 1 << ',' << train_.ids[i] << ',' << text::format_double(profile_.losses[i]) << ','
                   << text::format_double(reliab_.gamma[i]) << ',' << text::format_double(reliab_.omega[i]) << '\n';
        }
    }
    if (cfg_.snscl && cfg_.ablation.weight_correction && !cfg_.ablation.plain_scl) {
        correction_.refurbish(reliab_.omega, probs.data(), cfg_.alpha);
    }
}

void Trainer::train_epoch(bool main_phase, EpochTotals& totals) {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    const std::span<const std::size_t> all(order);
    try {
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const std::size_t len = std::min(cfg_.batch_size, order.size() - start);
            train_batch(all.subspan(start, len), main_phase, totals);
        }
    } catch (const NumericError& e) {
        std::cerr << "snscl: non-finite value in epoch " << epoch_ + 1 << " after " << totals.batches
                  << " batches (lr " << current_lr() << ", last batch total " << last_batch_.total << ", lnl "
                  << last_batch_.lnl << ", ntcl " << last_batch_.ntcl << ", kl " << last_batch_.kl << ")\n";
        throw TrainingError("epoch " + std::to_string(epoch_ + 1) + " aborted: " + e.what());
    }
}

void Trainer::train_batch(std::span<const std::size_t> idx, bool main_phase, EpochTotals& totals) {
    const std::size_t batch = idx.size();
    const std::size_t dim = train_.features.cols();
    Tensor x(batch, dim);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto src = train_.features.row_span(idx[b]);
        std::copy(src.begin(), src.end(), x.row_span(b).begin());
    }

    ad::Tape tape;
    ad::Var z = net_.backbone(tape, tape.constant(std::move(x)));
    ad::Var logits = net_.classify(tape, z);
    ad::Var lnl = classification_loss(cfg_.lnl, logits, targets_for(idx));
    ad::Var total = lnl;
    BatchTerms terms;
    terms.lnl = lnl.value().item();

    if (main_phase && cfg_.snscl) {
        if (cfg_.ablation.plain_scl) {
            if (batch >= 2) {
                ad::Var q = ad::l2_normalize_rows(net_.project(tape, z));
                std::vector<int> y(batch);
                for (std::size_t b = 0; b < batch; ++b) y[b] = train_.labels[idx[b]];
                ad::Var scl = contrastive::scl_batch_loss(q, y, cfg_.temperature);
                terms.ntcl = scl.value().item();
                total = ad::add(total, ad::scale(scl, cfg_.lambda_ntcl));
            }
        } else {
            ad::Var embedded;
            std::optional<ad::Var> kl;
            if (cfg_.ablation.stochastic_module) {
                const encoder::GaussianEmbedding ge = net_.encode(tape, z);
                const Tensor eps = encoder::standard_normal(batch, cfg_.embed_dim, rng_);
                embedded = encoder::sample(ge, eps);
                kl = encoder::kl_to_unit(ge);
            } else {
                embedded = net_.project(tape, z);
            }
            ad::Var q = ad::l2_normalize_rows(embedded);

            // Per sample: weighted queue insert, then the anchor's loss against the queue as it stands.
            std::vector<contrastive::ContrastTerm> per_anchor;
            per_anchor.reserve(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t i = idx[b];
                const std::size_t hard = hard_target(i);
                const double omega = cfg_.ablation.weight_update ? reliab_.omega[i] : 1.0;
                const auto row = q.value().row_span(b);
                queue_.weighted_update(hard, row, omega, rng_, i);
                per_anchor.push_back(contrastive::ntcl_term({row, hard, &queue_, cfg_.temperature}));
            }
            ad::Var ntcl = contrastive::ntcl_from_terms(q, per_anchor);
            terms.ntcl = ntcl.value().item();
            total = ad::add(total, ad::scale(ntcl, cfg_.lambda_ntcl));
            if (kl) {
                terms.kl = kl->value().item();
                total = ad::add(total, ad::scale(*kl, cfg_.lambda_kl));
            }
        }
    }
    terms.total = total.value().item();
    last_batch_ = terms;

    tape.backward(total);
    sgd_.step(current_lr());
    sgd_.zero_grad();

    totals.total += terms.total;
    totals.lnl += terms.lnl;
    totals.ntcl += terms.ntcl;
    totals.kl += terms.kl;
    ++totals.batches;
}

void Trainer::fill_diagnostics(EpochMetrics& m) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (vault_ == nullptr) {
        m.corrected_label_acc = m.clean_recall = m.mean_gamma_clean = m.mean_gamma_noisy = nan;
        return;
    }
    std::size_t correct = 0, clean = 0, clean_kept = 0;
    double g_clean = 0.0, g_noisy = 0.0;
    for (std::size_t i = 0; i < train_.size(); ++i) {
        const int truth = vault_->label(i);
        if (hard_target(i) == static_cast<std::size_t>(truth)) ++correct;
        if (train_.labels[i] == truth) {
            ++clean;
            g_clean += reliab_.gamma[i];
            if (reliab_.omega[i] == 1.0) ++clean_kept;
        } else {
            g_noisy += reliab_.gamma[i];
        }
    }
    const std::size_t noisy = train_.size() - clean;
    m.corrected_label_acc = static_cast<double>(correct) / static_cast<double>(train_.size());
    m.clean_recall = clean ? static_cast<double>(clean_kept) / static_cast<double>(clean) : nan;
    m.mean_gamma_clean = clean ? g_clean / static_cast<double>(clean) : nan;
    m.mean_gamma_noisy = noisy ? g_noisy / static_cast<double>(noisy) : nan;
}

EpochMetrics Trainer::run_epoch() {
    if (!warmed_up_) throw std::logic_error("Trainer::run_epoch: warmup has not run");
    refresh_reliability();
    EpochMetrics m;
    m.lr = current_lr();
    EpochTotals totals;
    train_epoch(true, totals);
    ++epoch_;

    m.epoch = epoch_;
    const double nb = static_cast<double>(std::max<std::size_t>(totals.batches, 1));
    m.train_loss = totals.total / nb;
    m.lnl_loss = totals.lnl / nb;
    m.ntcl_loss = totals.ntcl / nb;
    m.kl_loss = totals.kl / nb;
    m.test_acc = evaluate(net_, test_);
    m.corrected_samples = correction_.corrected_count();
    fill_diagnostics(m);
    for (std::size_t c = 0; c < queue_.num_classes(); ++c) m.queue_occupancy.push_back(queue_.occupancy(c));
    return m;
}

RunResult Trainer::run() {
    RunResult out;
    if (!warmed_up_) warmup();
    out.warmup_acc = evaluate(net_, test_);
    out.best_acc = out.last_acc = out.warmup_acc;
    for (int e = 0; e < cfg_.epochs; ++e) {
        out.history.push_back(run_epoch());
        const double acc = out.history.back().test_acc;
        out.best_acc = e == 0 ? acc : std::max(out.best_acc, acc);
        out.last_acc = acc;
    }
    return out;
}

RunResult run(const TrainingConfig& cfg, const data::TrainingView& train, const data::EvalView& test,
              const data::CleanLabelVault* diagnostics) {
    Trainer t(cfg, train, test, diagnostics);
    return t.run();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history,
                       const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto& c : comments) out << "# " << c << '\n';
    out << "epoch,train_loss,lnl_loss,ntcl_loss,kl_loss,test_acc,corrected_label_acc,clean_recall,"
           "mean_gamma_clean,mean_gamma_noisy\n";
    auto f = [](double v) { return std::isnan(v) ? std::string("nan") : text::format_double(v); };
    for (const auto& m : history) {
        out << m.epoch << ',' << f(m.train_loss) << ',' << f(m.lnl_loss) << ',' << f(m.ntcl_loss) << ','
            << f(m.kl_loss) << ',' << f(m.test_acc) << ',' << f(m.corrected_label_acc) << ',' << f(m.clean_recall)
            << ',' << f(m.mean_gamma_clean) << ',' << f(m.mean_gamma_noisy) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace snscl::train
