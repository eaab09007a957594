// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "gradcheck.hpp"
#include "snscl/contrastive.hpp"
#include "snscl/trainer.hpp"

using namespace snscl;
using snscl::testing::check_inputs;
using snscl::testing::check_params;
using snscl::testing::random_simplex_rows;
using snscl::testing::random_tensor;
using snscl::testing::random_unit_rows;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr int kInstances = 20;
constexpr double kGradTol = 1e-4;

encoder::NetworkConfig small_network() {
    encoder::NetworkConfig nc;
    nc.backbone_hidden = {8, 6};
    nc.num_classes = 4;
    nc.embed_dim = 3;
    nc.stochastic_hidden = {5, 5};
    return nc;
}

// Zero biases can put a sample exactly on a ReLU kink, where the
// derivative is one-sided; random biases keep instances generic.
void jitter_biases(std::vector<ad::Parameter*> params, std::mt19937_64& rng) {
    for (auto* p : params) {
        if (p->name.ends_with("bias")) p->value = random_tensor(1, p->value.cols(), rng, -0.2, 0.2);
    }
}

// ---------------------------------------------------------------------------
// 1. Gradient suite
// ---------------------------------------------------------------------------
Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, double>> worst;
    auto record = [&](const std::string& name, double err) {
        auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& w) { return w.first == name; });
        if (it == worst.end()) worst.emplace_back(name, err);
        else it->second = std::max(it->second, err);
    };

    std::mt19937_64 rng(2024);
    const std::vector<std::pair<const char*, snscl::testing::Builder>> ops = {
        {"matmul", [](ad::Tape&, const std::vector<ad::Var>& v) {
             return ad::sum(ad::softplus(ad::matmul(v[0], ad::slice_cols(v[1], 0, 3))));
         }},
        {"add", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::mul(ad::add(v[0], v[1]), v[0])); }},
        {"sub", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::mul(ad::sub(v[0], v[1]), v[1])); }},
        {"mul", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::mul(v[0], ad::mean(v[1]))); }},
        {"relu", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::mul(ad::relu(v[0]), v[1])); }},
        {"softplus", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::softplus(ad::mul(v[0], v[1]))); }},
        {"exp", [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::mean(ad::exp(ad::sub(v[0], v[1]))); }},
        {"log", [](ad::Tape&, const std::vector<ad::Var>& v) {
             return ad::sum(ad::mul(ad::log(ad::add_scalar(ad::exp(v[0]), 0.5)), v[1]));
         }},
        {"neg_scale_shift", [](ad::Tape&, const std::vector<ad::Var>& v) {
             return ad::sum(ad::mul(ad::add_scalar(ad::scale(ad::neg(v[0]), 2.5), 0.3), v[1]));
         }},
        {"l2_normalize", [](ad::Tape&, const std::vector<ad::Var>& v) {
             return ad::sum(ad::mul(ad::l2_normalize_rows(v[0]), v[1]));
         }},
    };
    for (const auto& [name, f] : ops) {
        for (int i = 0; i < kInstances; ++i) {
            const Tensor a = random_tensor(4, 4, rng);
            const Tensor b = random_tensor(4, 4, rng);
            record(name, check_inputs(f, {a, b}));
        }
    }

    for (int i = 0; i < kInstances; ++i) {
        const Tensor logits = random_tensor(4, 5, rng, -3, 3);
        const Tensor t = random_simplex_rows(4, 5, rng);
        for (const train::LossSpec spec : {train::LossSpec{train::LossKind::ce},
                                           train::LossSpec{train::LossKind::label_smooth, 0.1, 0.7},
                                           train::LossSpec{train::LossKind::gce, 0.1, 0.7}}) {
            record(train::to_string(spec.kind), check_inputs([&](ad::Tape&, const std::vector<ad::Var>& v) {
                       return train::classification_loss(spec, v[0], t);
                   }, {logits}));
        }
    }

    for (int i = 0; i < kInstances; ++i) {
        nn::Mlp mlp("m", {3, 6, 5, 4}, false);
        mlp.init(rng);
        std::vector<ad::Parameter*> params;
        mlp.collect(params);
        jitter_biases(params, rng);
        const Tensor x = random_tensor(5, 3, rng);
        const Tensor t = random_simplex_rows(5, 4, rng);
        record("mlp", check_params(params, [&](ad::Tape& tape) {
                   return ad::softmax_cross_entropy(mlp.forward(tape, tape.constant(x)), t).loss;
               }));
    }

    for (int i = 0; i < kInstances; ++i) {
        encoder::Network net(small_network());
        net.init(rng);
        jitter_biases(net.parameters(), rng);
        const Tensor x = random_tensor(4, 2, rng);
        const Tensor w = random_tensor(4, 3, rng);
        const Tensor eps = encoder::standard_normal(4, 3, rng);
        record("projector", check_params(net.parameters(), [&](ad::Tape& tape) {
                   return ad::sum(ad::mul(net.project(tape, net.backbone(tape, tape.constant(x))), tape.constant(w)));
               }));
        record("stochastic_module", check_params(net.parameters(), [&](ad::Tape& tape) {
                   const auto ge = net.encode(tape, net.backbone(tape, tape.constant(x)));
                   return ad::sum(ad::mul(encoder::sample(ge, eps), tape.constant(w)));
               }));
        record("kl", check_params(net.parameters(), [&](ad::Tape& tape) {
                   return encoder::kl_to_unit(net.encode(tape, net.backbone(tape, tape.constant(x))));
               }));
    }

    for (int i = 0; i < kInstances; ++i) {
        queue::MomentumQueue q(5, 8, 4);
        const std::size_t fill = 1 + static_cast<std::size_t>(i) % 8;
        for (std::size_t c = 0; c < 5; ++c) {
            const Tensor keys = random_unit_rows(fill, 4, rng);
            for (std::size_t r = 0; r < fill; ++r) q.insert(c, keys.row_span(r));
        }
        const std::vector<std::size_t> labels{0, 3, 1, 4, 3};
        const Tensor raw = random_tensor(5, 4, rng);
        record("ntcl", check_inputs([&](ad::Tape&, const std::vector<ad::Var>& v) {
                   return contrastive::ntcl_loss(ad::l2_normalize_rows(v[0]), q, labels, 0.2);
               }, {raw}));
        const std::vector<int> batch_labels{0, 1, 0, 2, 1, 0};
        const Tensor emb = random_tensor(6, 4, rng);
        record("in_batch_scl", check_inputs([&](ad::Tape&, const std::vector<ad::Var>& v) {
                   return contrastive::scl_batch_loss(ad::l2_normalize_rows(v[0]), batch_labels, 0.3);
               }, {emb}));
    }

    const double secs = seconds_since(t0);
    Outcome o;
    std::string worst_name;
    double worst_err = 0.0;
    for (const auto& [name, err] : worst) {
        if (!(err < kGradTol)) {
            o.pass = false;
            o.detail += name + " rel err " + fmt("%.2e", err) + "; ";
        }
        if (err >= worst_err) worst_err = err, worst_name = name;
    }
    if (secs >= 60.0) o.pass = false;
    o.detail += fmt("%zu operations x %d instances, worst rel err %.2e (%s), %.1f s", worst.size(), kInstances,
                    worst_err, worst_name.c_str(), secs);
    return o;
}

// ---------------------------------------------------------------------------
// 2. Closed-form oracles
// ---------------------------------------------------------------------------
Outcome closed_forms() {
    queue::MomentumQueue q(10, 32, 3);
    const std::vector<double> key{0.0, 0.6, 0.8};
    for (std::size_t c = 0; c < 10; ++c)
        for (int d = 0; d < 32; ++d) q.insert(c, key);
    const std::vector<double> anchor{1.0, 0.0, 0.0};
    const double ntcl = contrastive::ntcl_term({anchor, 3, &q, 0.07}).loss;
    const double ntcl_err = std::abs(ntcl - std::log(320.0));

    const double kl = std::abs(encoder::kl_to_unit(std::vector<double>{0.0}, std::vector<double>{1.0}));

    std::mt19937_64 rng(9);
    double ls_err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Tensor logits = random_tensor(6, 10, rng, -4, 4);
        const Tensor t = random_simplex_rows(6, 10, rng);
        ad::Tape tape;
        const double ce = train::classification_loss({train::LossKind::ce}, tape.constant(logits), t).value().item();
        const double ls =
            train::classification_loss({train::LossKind::label_smooth, 0.0}, tape.constant(logits), t).value().item();
        ls_err = std::max(ls_err, std::abs(ce - ls));
    }
    return {ntcl_err < 1e-9 && kl < 1e-12 && ls_err < 1e-12,
            fmt("|ntcl - ln 320| = %.1e, |KL(0,1)| = %.1e, max |ls(0) - ce| = %.1e", ntcl_err, kl, ls_err)};
}

// ---------------------------------------------------------------------------
// 3. EM recovery
// ---------------------------------------------------------------------------
Outcome em_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double dm = 0.0, dw = 0.0;
    std::size_t iterations = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::bernoulli_distribution second(0.4);
        std::normal_distribution<double> a(0.1, 0.05), b(0.9, 0.05);
        std::vector<double> x(6000);
        for (double& v : x) v = second(rng) ? b(rng) : a(rng);
        const auto fit = reliability::fit_gmm2(x);
        const auto& p = fit.params;
        dm = std::max({dm, std::abs(p.mean[0] - 0.1), std::abs(p.mean[1] - 0.9)});
        dw = std::max({dw, std::abs(p.weight[0] - 0.6), std::abs(p.weight[1] - 0.4)});
        for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
            const double prev = fit.log_likelihood[i - 1];
            if (fit.log_likelihood[i] < prev - 1e-9 * std::abs(prev)) ok = false;
        }
        iterations += fit.log_likelihood.size();
    }
    const double secs = seconds_since(t0);
    ok = ok && dm <= 0.02 && dw <= 0.03 && secs < 5.0;
    return {ok, fmt("10 seeds, max |mean err| %.4f, max |weight err| %.4f, log-likelihood monotone over %zu "
                    "iterations, %.2f s",
                    dm, dw, iterations, secs)};
}

// ---------------------------------------------------------------------------
// 4. Weighted-update statistics
// ---------------------------------------------------------------------------
Outcome weighted_update() {
    Outcome o;
    const int n = 10000;
    const std::vector<double> key{1.0, 0.0};
    for (double omega : {0.1, 0.3, 0.7}) {
        queue::MomentumQueue q(2, 1, 2);
        std::mt19937_64 rng(static_cast<std::uint64_t>(omega * 977));
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += q.weighted_update(0, key, omega, rng) ? 1 : 0;
        const double freq = hits / double(n);
        const double band = 3.0 * std::sqrt(omega * (1.0 - omega) / n);
        if (std::abs(freq - omega) > band) o.pass = false;
        o.detail += fmt("w=%.1f: %.4f (+-%.4f)  ", omega, freq, band);
    }
    return o;
}

// ---------------------------------------------------------------------------
// 5. Queue semantics
// ---------------------------------------------------------------------------
Outcome queue_semantics() {
    std::mt19937_64 rng(77);
    std::size_t mismatches = 0, partition_violations = 0, snapshots = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        const std::size_t C = 2 + rng() % 4, D = 1 + rng() % 6, n = rng() % 60;
        queue::MomentumQueue q(C, D, 3);
        std::vector<std::deque<std::pair<Tensor, std::size_t>>> oracle(C);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t c = rng() % C;
            const Tensor key = random_unit_rows(1, 3, rng);
            q.insert(c, key.row_span(0), k);
            oracle[c].push_back({key, k});
            if (oracle[c].size() > D) oracle[c].pop_front();

            ++snapshots;
            for (std::size_t a = 0; a < C; ++a) {
                const auto own = q.sample_ids(a);
                const std::set<std::size_t> pos(own.begin(), own.end());
                const auto neg = q.negatives(a);
                std::size_t others = 0;
                for (std::size_t b = 0; b < C; ++b) others += b == a ? 0 : q.occupancy(b);
                if (neg.keys.rows() != others || neg.classes.size() != others) ++partition_violations;
                for (std::size_t cls : neg.classes) partition_violations += cls == a ? 1 : 0;
                for (std::size_t b = 0; b < C; ++b) {
                    if (b == a) continue;
                    for (std::size_t sid : q.sample_ids(b)) partition_violations += pos.count(sid);
                }
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            const Tensor p = q.positives(c);
            const auto ids = q.sample_ids(c);
            if (p.rows() != oracle[c].size()) {
                ++mismatches;
                continue;
            }
            for (std::size_t r = 0; r < p.rows(); ++r) {
                const Tensor& want = oracle[c][r].first;
                if (ids[r] != oracle[c][r].second) ++mismatches;
                for (std::size_t j = 0; j < 3; ++j) mismatches += p(r, j) == want(0, j) ? 0 : 1;
            }
        }
    }

    const std::size_t C = 10, D = 32;
    queue::MomentumQueue full(C, D, 4);
    for (int round = 0; round < 40; ++round) {
        for (std::size_t c = 0; c < C; ++c) full.insert(c, random_unit_rows(1, 4, rng).row_span(0));
    }
    bool count_ok = true;
    for (std::size_t c = 0; c < C; ++c) count_ok = count_ok && full.negatives(c).keys.rows() == D * (C - 1);

    return {mismatches == 0 && partition_violations == 0 && count_ok,
            fmt("1000 sequences: %zu FIFO mismatches, %zu partition violations over %zu snapshots; full-queue "
                "negatives %zu (D(C-1) = %zu)",
                mismatches, partition_violations, snapshots, full.negatives(0).keys.rows(), D * (C - 1))};
}

// ---------------------------------------------------------------------------
// Shared benchmark data for 6-9
// ---------------------------------------------------------------------------
struct Benchmark {
    data::Dataset train;
    data::Dataset test;
    data::TrainingView view;
    data::EvalView eval;
};

Benchmark make_benchmark(int s) {
    data::BlobSpec spec;   // 10 classes in 5 pairs, d = 2, 200/100 per class
    spec.seed = 100 + static_cast<std::uint64_t>(s);
    auto pair = data::make_fine_grained_blobs(spec);
    const auto t = data::build_transition({data::NoiseKind::symmetric, 0.4, 0}, spec.num_classes);
    Benchmark b;
    b.train = data::inject_noise(std::move(pair.train), t, 200 + static_cast<std::uint64_t>(s)).dataset;
    b.test = std::move(pair.test);
    b.view = data::training_view(b.train);
    b.eval = data::eval_view(b.test);
    return b;
}

// ---------------------------------------------------------------------------
// 6. Reduction identity
// ---------------------------------------------------------------------------
std::vector<Tensor> snapshot(const train::Trainer& t) {
    std::vector<Tensor> out;
    for (const auto* p : t.network().parameters()) out.push_back(p->value);
    return out;
}

Outcome reduction_identity() {
    const Benchmark b = make_benchmark(0);
    train::TrainingConfig base;
    base.seed = 7;
    base.snscl = false;
    train::TrainingConfig reduced = base;
    reduced.snscl = true;
    reduced.ablation = {false, false, false, false};
    reduced.lambda_ntcl = 0.0;
    reduced.lambda_kl = 0.0;

    train::Trainer a(base, b.view, b.eval), r(reduced, b.view, b.eval);
    a.warmup();
    r.warmup();
    bool same = snapshot(a) == snapshot(r);
    int compared = 0;
    for (int e = 0; e < 5 && same; ++e, ++compared) {
        const auto ma = a.run_epoch(), mr = r.run_epoch();
        same = ma.test_acc == mr.test_acc && ma.train_loss == mr.train_loss && snapshot(a) == snapshot(r);
    }
    return {same && compared == 5,
            fmt("%d main epochs after warmup, parameters/loss/accuracy bit-identical: %s", compared,
                same ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 7-9. End-to-end runs
// ---------------------------------------------------------------------------
struct PairedRun {
    train::RunResult ce;
    train::RunResult snscl;
    double seconds = 0.0;
};

std::vector<PairedRun> paired_runs(int seeds) {
    std::vector<PairedRun> out;
    for (int s = 0; s < seeds; ++s) {
        const Benchmark b = make_benchmark(s);
        const data::CleanLabelVault vault(b.train);
        const auto t0 = std::chrono::steady_clock::now();
        train::TrainingConfig cfg;   // defaults: 5 warmup + 55 main epochs
        cfg.seed = 7 + static_cast<std::uint64_t>(s);
        PairedRun p;
        cfg.snscl = false;
        p.ce = train::run(cfg, b.view, b.eval, &vault);
        cfg.snscl = true;
        p.snscl = train::run(cfg, b.view, b.eval, &vault);
        p.seconds = seconds_since(t0);
        std::printf("  seed %d: CE best %.3f last %.3f | SNSCL best %.3f last %.3f | gamma clean %.3f noisy %.3f | "
                    "corrected %.3f | %.1f s\n",
                    s, p.ce.best_acc, p.ce.last_acc, p.snscl.best_acc, p.snscl.last_acc,
                    p.snscl.history.front().mean_gamma_clean, p.snscl.history.front().mean_gamma_noisy,
                    p.snscl.history.back().corrected_label_acc, p.seconds);
        std::fflush(stdout);
        out.push_back(std::move(p));
    }
    return out;
}

Outcome end_to_end(const std::vector<PairedRun>& runs) {
    double ce_last = 0.0, sn_last = 0.0, slowest = 0.0;
    int gap_wins = 0;
    for (const auto& r : runs) {
        ce_last += r.ce.last_acc / runs.size();
        sn_last += r.snscl.last_acc / runs.size();
        gap_wins += (r.ce.best_acc - r.ce.last_acc) > (r.snscl.best_acc - r.snscl.last_acc) ? 1 : 0;
        slowest = std::max(slowest, r.seconds);
    }
    const double delta = sn_last - ce_last;
    return {delta >= 0.05 && gap_wins >= 4,
            fmt("mean last acc CE %.4f vs SNSCL %.4f (delta %+.2f points, need >= 5); CE gap larger in %d/%zu seeds "
                "(need >= 4); slowest pair %.0f s",
                ce_last, sn_last, 100.0 * delta, gap_wins, runs.size(), slowest)};
}

Outcome reliability_separation(const std::vector<PairedRun>& runs) {
    Outcome o;
    double smallest = 1.0;
    for (const auto& r : runs) {
        const auto& m = r.snscl.history.front();   // reliability fitted right after warmup
        const double sep = m.mean_gamma_clean - m.mean_gamma_noisy;
        smallest = std::min(smallest, sep);
        if (!(sep >= 0.2)) o.pass = false;
    }
    o.detail = fmt("smallest clean-minus-noisy mean gamma after warmup %.3f over %zu seeds (need >= 0.2)", smallest,
                   runs.size());
    return o;
}

Outcome correction_quality(const std::vector<PairedRun>& runs) {
    Outcome o;
    double lowest = 1.0;
    for (const auto& r : runs) {
        const double acc = r.snscl.history.back().corrected_label_acc;
        lowest = std::min(lowest, acc);
        if (!(acc > 0.6)) o.pass = false;
    }
    o.detail = fmt("lowest final corrected-label accuracy %.4f over %zu seeds (need > 0.6)", lowest, runs.size());
    return o;
}

// ---------------------------------------------------------------------------
// 10. Noise injection statistics
// ---------------------------------------------------------------------------
Outcome noise_statistics() {
    data::BlobSpec spec;
    spec.train_per_class = 1000;   // n = 10^4
    spec.test_per_class = 1;
    spec.seed = 31;
    const auto pair = data::make_fine_grained_blobs(spec);
    const std::size_t C = spec.num_classes;
    const auto noisy =
        data::inject_noise(pair.train, data::build_transition({data::NoiseKind::symmetric, 0.4, 0}, C), 32).dataset;
    const double rate = data::empirical_noise_rate(noisy);

    // Wrong labels within each clean class should be uniform over the other
    // C-1 classes: pooled chi-square over C(C-1) cells, C(C-2) dof.
    std::vector<std::vector<double>> counts(C, std::vector<double>(C, 0.0));
    std::vector<double> wrong(C, 0.0);
    for (const auto& s : noisy.samples) {
        if (s.noisy_label == s.clean_label) continue;
        counts[static_cast<std::size_t>(s.clean_label)][static_cast<std::size_t>(s.noisy_label)] += 1.0;
        wrong[static_cast<std::size_t>(s.clean_label)] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const double expected = wrong[c] / double(C - 1);
        for (std::size_t j = 0; j < C; ++j) {
            if (j != c) chi2 += (counts[c][j] - expected) * (counts[c][j] - expected) / expected;
        }
    }
    const double dof = double(C * (C - 2));
    const double p = boost::math::gamma_q(dof / 2.0, chi2 / 2.0);
    return {std::abs(rate - 0.4) <= 0.015 && p > 0.01,
            fmt("n=%zu, empirical rate %.4f (0.4 +- 0.015); chi2 %.1f on %.0f dof, p = %.3f", noisy.size(), rate, chi2,
                dof, p)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, const Outcome& o) {
        std::printf("criterion %d: %s  %s -- %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };
    report(1, "gradient suite", gradient_suite());
    report(2, "closed-form loss oracles", closed_forms());
    report(3, "EM recovery", em_recovery());
    report(4, "weighted-update statistics", weighted_update());
    report(5, "queue semantics", queue_semantics());
    report(6, "reduction identity", reduction_identity());
    std::printf("end-to-end runs (40%% symmetric noise, 5 seeds):\n");
    const auto runs = paired_runs(5);
    report(7, "end-to-end trend", end_to_end(runs));
    report(8, "reliability separation", reliability_separation(runs));
    report(9, "label-correction quality", correction_quality(runs));
    report(10, "noise injection statistics", noise_statistics());
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
