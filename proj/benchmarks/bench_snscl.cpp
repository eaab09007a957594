#include <benchmark/benchmark.h>

#include <random>

#include "snscl/contrastive.hpp"
#include "snscl/reliability.hpp"
#include "snscl/trainer.hpp"

using namespace snscl;

namespace {

Tensor unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    Tensor t = encoder::standard_normal(n, d, rng);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : t.row_span(i)) s += v * v;
        for (double& v : t.row_span(i)) v /= std::sqrt(s);
    }
    return t;
}

// One anchor against a full C x D queue.
void BM_NtclTerm(benchmark::State& state) {
    const std::size_t C = 10, D = static_cast<std::size_t>(state.range(0)), dim = 32;
    std::mt19937_64 rng(1);
    queue::MomentumQueue q(C, D, dim);
    for (std::size_t c = 0; c < C; ++c) {
        const Tensor keys = unit_rows(D, dim, rng);
        for (std::size_t r = 0; r < D; ++r) q.insert(c, keys.row_span(r));
    }
    const Tensor anchor = unit_rows(1, dim, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(contrastive::ntcl_term({anchor.row_span(0), 3, &q, 0.07}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(C * D));
}
BENCHMARK(BM_NtclTerm)->Arg(32)->Arg(128);

// EM on a per-epoch loss profile.
void BM_FitGmm2(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::bernoulli_distribution noisy(0.4);
    std::normal_distribution<double> clean_loss(0.1, 0.05), noisy_loss(0.9, 0.05);
    std::vector<double> x(static_cast<std::size_t>(state.range(0)));
    for (double& v : x) v = noisy(rng) ? noisy_loss(rng) : clean_loss(rng);
    for (auto _ : state) benchmark::DoNotOptimize(reliability::fit_gmm2(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitGmm2)->Arg(2000)->Arg(6000);

// One main-phase epoch on the default benchmark (2,000 training samples).
void BM_TrainEpoch(benchmark::State& state) {
    data::BlobSpec spec;
    auto pair = data::make_fine_grained_blobs(spec);
    const auto train = data::inject_noise(std::move(pair.train),
                                          data::build_transition({data::NoiseKind::symmetric, 0.4, 0}, 10), 3)
                           .dataset;
    const auto view = data::training_view(train);
    const auto eval = data::eval_view(pair.test);
    train::TrainingConfig cfg;
    cfg.snscl = state.range(0) != 0;
    cfg.warmup_epochs = 1;
    train::Trainer trainer(cfg, view, eval);
    trainer.warmup();
    for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch());
    state.SetLabel(cfg.snscl ? "snscl" : "baseline");
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
