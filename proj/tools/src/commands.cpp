#include "snscl/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "snscl/text.hpp"

namespace snscl::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> header_lines(const ExperimentConfig& cfg, const std::string& kind) {
    return {"snscl " + kind, "config_hash: " + config_hash(cfg), "data_hash: " + data_hash(cfg), "label: " + cfg.label};
}

void write_text(const fs::path& path, const std::vector<std::string>& header, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto& h : header) out << "# " << h << '\n';
    out << body;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void prepare_out(const fs::path& dir, const std::vector<fs::path>& files, const std::string& hash, bool force) {
    for (const auto& f : files) check_overwrite(dir / f, hash, force);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

struct LoadedData {
    data::Dataset train;
    data::Dataset test;
};

LoadedData generate(const ExperimentConfig& cfg) {
    auto pair = data::make_fine_grained_blobs(cfg.blob_spec());
    const auto t = data::build_transition(cfg.noise_spec(), cfg.blobs.num_classes);
    auto noisy = data::inject_noise(std::move(pair.train), t, cfg.noise_spec().seed);
    return {std::move(noisy.dataset), std::move(pair.test)};
}

LoadedData load_dataset(const ExperimentConfig& cfg) {
    const fs::path dir = cfg.dataset_path();
    const fs::path train = dir / "train.csv";
    const fs::path test = dir / "test.csv";
    for (const auto& p : {train, test}) {
        if (!fs::exists(p)) throw std::runtime_error("dataset file '" + p.string() + "' not found (run `gen` first)");
        const auto h = read_header(p);
        const auto it = h.find("data_hash");
        if (it == h.end() || it->second != data_hash(cfg)) {
            throw ConfigError("dataset '" + p.string() + "' was generated from different data/noise settings");
        }
    }
    return {data::read_dataset_csv(train, cfg.blobs.num_classes), data::read_dataset_csv(test, cfg.blobs.num_classes)};
}

struct TrainOutcome {
    train::RunResult result;
    double seconds = 0.0;
};

TrainOutcome train_once(const ExperimentConfig& cfg, const LoadedData& d, std::ostream& log, const std::string& tag,
                        std::ostream* dump = nullptr, const fs::path& checkpoint = {}) {
    const auto tv = data::training_view(d.train);
    const auto ev = data::eval_view(d.test);
    const data::CleanLabelVault vault(d.train);
    const auto start = Clock::now();
    train::Trainer trainer(cfg.training, tv, ev, &vault);
    if (dump != nullptr) trainer.set_reliability_dump(dump);
    trainer.warmup();
    TrainOutcome o;
    o.result.warmup_acc = train::evaluate(trainer.network(), ev);
    log << tag << "warmup " << cfg.training.warmup_epochs << " epochs, test acc " << fixed(o.result.warmup_acc) << '\n';
    o.result.best_acc = o.result.warmup_acc;
    o.result.last_acc = o.result.warmup_acc;
    for (int e = 0; e < cfg.training.epochs; ++e) {
        auto m = trainer.run_epoch();
        if (e == 0) o.result.best_acc = m.test_acc;
        o.result.best_acc = std::max(o.result.best_acc, m.test_acc);
        o.result.last_acc = m.test_acc;
        log << tag << "epoch " << m.epoch << " loss " << fixed(m.train_loss) << " acc " << fixed(m.test_acc);
        if (cfg.training.snscl) log << " corrected " << fixed(m.corrected_label_acc);
        log << '\n';
        o.result.history.push_back(std::move(m));
    }
    o.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (!checkpoint.empty()) encoder::save_checkpoint(checkpoint, trainer.network(), header_lines(cfg, "checkpoint"));
    return o;
}

template <class F>
int guarded(std::ostream& err, const char* command, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "snscl " << command << ": " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "snscl " << command << ": " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace

std::map<std::string, std::string> read_header(const fs::path& path) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line) && line.rfind('#', 0) == 0) {
        const std::string_view body = text::trim(std::string_view(line).substr(1));
        const auto colon = body.find(':');
        if (colon == std::string_view::npos) continue;
        out[std::string(text::trim(body.substr(0, colon)))] = std::string(text::trim(body.substr(colon + 1)));
    }
    return out;
}

void check_overwrite(const fs::path& path, const std::string& hash, bool force) {
    if (force || !fs::exists(path)) return;
    const auto h = read_header(path);
    const auto it = h.find("config_hash");
    if (it == h.end()) {
        throw ConfigError("refusing to overwrite '" + path.string() + "' (no config hash header); use --force");
    }
    if (it->second != hash) {
        throw ConfigError("refusing to overwrite '" + path.string() + "' written under config " + it->second +
                          " (current " + hash + "); use --force");
    }
}

ExperimentConfig resolve(const CommandOptions& opts, const std::string& command) {
    ExperimentConfig cfg = opts.config.empty() ? ExperimentConfig{} : load_config(opts.config);
    if (opts.out) {
        // `train --out X` keeps reading the dataset the config points at.
        if (command != "gen" && cfg.dataset_dir.empty()) cfg.dataset_dir = cfg.out;
        cfg.out = *opts.out;
    }
    if (opts.seed) {
        if (command == "gen") cfg.data_seed = *opts.seed;
        else cfg.training.seed = *opts.seed;
    }
    try {
        if (opts.lnl) cfg.training.lnl.kind = train::parse_loss_kind(*opts.lnl);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (const auto& a : opts.ablations) apply_ablation(cfg.training.ablation, a);
    if (opts.no_snscl) {
        if (command == "compare") throw ConfigError("--no-snscl has no meaning for compare (it always runs both)");
        cfg.training.snscl = false;
    }
    cfg.validate();
    return cfg;
}

int cmd_gen(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, "gen", [&] {
        const ExperimentConfig cfg = resolve(opts, "gen");
        const std::string hash = config_hash(cfg);
        prepare_out(cfg.out, {"train.csv", "test.csv", "manifest.txt"}, hash, opts.force);

        const LoadedData d = generate(cfg);
        const auto header = header_lines(cfg, "dataset");
        data::write_dataset_csv(cfg.out / "train.csv", d.train, header);
        data::write_dataset_csv(cfg.out / "test.csv", d.test, header);

        const double rate = data::empirical_noise_rate(d.train);
        std::ostringstream m;
        m << "data_seed = " << cfg.data_seed << '\n'
          << "blob_seed = " << cfg.blob_spec().seed << '\n'
          << "noise_seed = " << cfg.noise_spec().seed << '\n'
          << "noise_kind = " << data::to_string(cfg.noise_kind) << '\n'
          << "noise_rate = " << text::format_double(cfg.noise_rate) << '\n'
          << "empirical_noise_rate = " << text::format_double(rate) << '\n'
          << "train_rows = " << d.train.size() << '\n'
          << "test_rows = " << d.test.size() << "\n\n"
          << to_ini(cfg);
        write_text(cfg.out / "manifest.txt", header_lines(cfg, "manifest"), m.str());
        log << "gen: " << d.train.size() << " train / " << d.test.size() << " test rows, empirical noise rate "
            << fixed(rate) << " -> " << cfg.out.string() << '\n';
        return int{kOk};
    });
}

int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, "train", [&] {
        const ExperimentConfig cfg = resolve(opts, "train");
        const std::string hash = config_hash(cfg);
        std::vector<fs::path> outputs{"metrics.csv", "summary.txt"};
        if (cfg.save_checkpoint) outputs.emplace_back("model.ckpt");
        if (cfg.dump_reliability) outputs.emplace_back("reliability.csv");
        const LoadedData d = load_dataset(cfg);
        prepare_out(cfg.out, outputs, hash, opts.force);

        std::ofstream dump;
        if (cfg.dump_reliability) {
            dump.open(cfg.out / "reliability.csv");
            if (!dump) throw std::runtime_error("cannot open reliability dump");
            for (const auto& h : header_lines(cfg, "reliability")) dump << "# " << h << '\n';
        }
        const auto o = train_once(cfg, d, log, "train: ", cfg.dump_reliability ? &dump : nullptr,
                                  cfg.save_checkpoint ? cfg.out / "model.ckpt" : fs::path{});
        train::write_metrics_csv(cfg.out / "metrics.csv", o.result.history, header_lines(cfg, "metrics"));

        std::ostringstream s;
        s << "method = " << (cfg.training.snscl ? "snscl" : "baseline") << '\n'
          << "lnl = " << train::to_string(cfg.training.lnl.kind) << '\n'
          << "warmup_acc = " << text::format_double(o.result.warmup_acc) << '\n'
          << "best_acc = " << text::format_double(o.result.best_acc) << '\n'
          << "last_acc = " << text::format_double(o.result.last_acc) << '\n'
          << "wall_time_s = " << fixed(o.seconds, 3) << '\n'
          << "config_hash = " << hash << '\n';
        write_text(cfg.out / "summary.txt", header_lines(cfg, "summary"), s.str());
        log << "train: best " << fixed(o.result.best_acc) << " last " << fixed(o.result.last_acc) << " ("
            << fixed(o.seconds, 1) << " s)\n";
        return int{kOk};
    });
}

int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, "compare", [&] {
        const ExperimentConfig cfg = resolve(opts, "compare");
        const std::string hash = config_hash(cfg);
        prepare_out(cfg.out, {"compare_report.txt", "curves.csv", "metrics_baseline.csv", "metrics_snscl.csv"}, hash,
                    opts.force);

        const LoadedData d = generate(cfg);
        ExperimentConfig base = cfg;
        base.training.snscl = false;
        ExperimentConfig full = cfg;
        full.training.snscl = true;
        const auto b = train_once(base, d, log, "baseline: ");
        const auto s = train_once(full, d, log, "snscl: ");

        const auto header = header_lines(cfg, "compare");
        train::write_metrics_csv(cfg.out / "metrics_baseline.csv", b.result.history, header);
        train::write_metrics_csv(cfg.out / "metrics_snscl.csv", s.result.history, header);

        std::ostringstream curves;
        curves << "epoch,acc_baseline,acc_snscl\n";
        for (std::size_t i = 0; i < b.result.history.size(); ++i) {
            curves << b.result.history[i].epoch << ',' << text::format_double(b.result.history[i].test_acc) << ','
                   << text::format_double(s.result.history[i].test_acc) << '\n';
        }
        write_text(cfg.out / "curves.csv", header, curves.str());

        std::ostringstream r;
        r << "method      best     last     gap      time_s\n";
        auto row = [&](const char* name, const TrainOutcome& o) {
            r << name << fixed(o.result.best_acc) << "   " << fixed(o.result.last_acc) << "   "
              << fixed(o.result.best_acc - o.result.last_acc) << "   " << fixed(o.seconds, 1) << '\n';
        };
        row("baseline    ", b);
        row("snscl       ", s);
        r << "\nlnl = " << train::to_string(cfg.training.lnl.kind) << '\n'
          << "delta_last = " << fixed(s.result.last_acc - b.result.last_acc) << '\n'
          << "delta_best = " << fixed(s.result.best_acc - b.result.best_acc) << '\n';
        write_text(cfg.out / "compare_report.txt", header, r.str());
        log << r.str();
        return int{kOk};
    });
}

}  // namespace snscl::cli
