#include <iostream>

#include "CLI11.hpp"
#include "snscl/cli/commands.hpp"

int main(int argc, char** argv) {
    using namespace snscl::cli;
    CLI::App app{"snscl: noisy-label training experiments with stochastic noise-tolerated contrastive learning"};
    app.require_subcommand(1);

    CommandOptions opts;
    std::string out, lnl;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "Experiment config file (INI)")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (overrides run.out)");
        sub->add_option("--seed", seed, "Seed override (data seed for gen, training seed otherwise)");
        sub->add_flag("--force", opts.force, "Overwrite outputs produced under a different config");
    };
    auto add_training = [&](CLI::App* sub) {
        sub->add_option("--lnl", lnl, "Classification loss")->check(CLI::IsMember({"ce", "ls", "gce"}));
        sub->add_option("--ablation", opts.ablations, "Disable a component (repeatable)")
            ->check(CLI::IsMember({"no-correct", "no-wupdate", "no-stoch", "plain_scl"}));
    };

    auto* gen = app.add_subcommand("gen", "Generate the noisy train/test dataset");
    add_common(gen);
    auto* trn = app.add_subcommand("train", "Train one model on a generated dataset");
    add_common(trn);
    add_training(trn);
    trn->add_flag("--no-snscl", opts.no_snscl, "Train the classification loss alone");
    auto* cmp = app.add_subcommand("compare", "Baseline vs SNSCL on shared data and seed");
    add_common(cmp);
    add_training(cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    for (auto* sub : {gen, trn, cmp}) {
        if (!sub->parsed()) continue;
        if (sub->count("--out")) opts.out = out;
        if (sub->count("--seed")) opts.seed = seed;
        if (sub != gen && sub->count("--lnl")) opts.lnl = lnl;
    }
    if (gen->parsed()) return cmd_gen(opts, std::cout, std::cerr);
    if (trn->parsed()) return cmd_train(opts, std::cout, std::cerr);
    return cmd_compare(opts, std::cout, std::cerr);
}
