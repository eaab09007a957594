#include "snscl/cli/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "snscl/text.hpp"

namespace snscl::cli {

namespace {

std::string fail_at(const std::string& origin, int line, const std::string& what) {
    return origin + ":" + std::to_string(line) + ": " + what;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<std::size_t> parse_sizes(std::string_view s) {
    std::vector<std::size_t> out;
    for (const auto& f : text::split(s, ',')) out.push_back(text::parse_uint(text::trim(f)));
    return out;
}

std::vector<int> parse_ints(std::string_view s) {
    std::vector<int> out;
    for (const auto& f : text::split(s, ',')) out.push_back(static_cast<int>(text::parse_int(text::trim(f))));
    return out;
}

std::string ablation_string(const train::Ablation& a) {
    std::vector<std::string> on;
    if (!a.weight_correction) on.emplace_back("no-correct");
    if (!a.weight_update) on.emplace_back("no-wupdate");
    if (!a.stochastic_module) on.emplace_back("no-stoch");
    if (a.plain_scl) on.emplace_back("plain_scl");
    if (on.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < on.size(); ++i) s += (i ? "," : "") + on[i];
    return s;
}

std::string init_string(labels::CorrectionState::Init i) {
    return i == labels::CorrectionState::Init::first_correction ? "first_correction" : "observed_label";
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum class Scope { run, data, other };

struct Key {
    const char* section;
    const char* name;
    Scope scope;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define SNSCL_UINT(sec, key, scope, field)                                                       \
    Key{sec, key, scope, [](const ExperimentConfig& c) { return std::to_string(c.field); },       \
        [](ExperimentConfig& c, std::string_view v) { c.field = static_cast<decltype(c.field)>(text::parse_uint(v)); }}
#define SNSCL_INT(sec, key, scope, field)                                                        \
    Key{sec, key, scope, [](const ExperimentConfig& c) { return std::to_string(c.field); },       \
        [](ExperimentConfig& c, std::string_view v) { c.field = static_cast<decltype(c.field)>(text::parse_int(v)); }}
#define SNSCL_DOUBLE(sec, key, scope, field)                                                     \
    Key{sec, key, scope, [](const ExperimentConfig& c) { return text::format_double(c.field); },  \
        [](ExperimentConfig& c, std::string_view v) { c.field = text::parse_double(v); }}
#define SNSCL_BOOL(sec, key, scope, field)                                                       \
    Key{sec, key, scope, [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }, \
        [](ExperimentConfig& c, std::string_view v) { c.field = text::parse_bool(v); }}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        Key{"run", "label", Scope::other, [](const ExperimentConfig& c) { return c.label; },
            [](ExperimentConfig& c, std::string_view v) { c.label = std::string(v); }},
        Key{"run", "out", Scope::run, [](const ExperimentConfig& c) { return c.out.string(); },
            [](ExperimentConfig& c, std::string_view v) { c.out = std::string(v); }},
        Key{"run", "dataset", Scope::run, [](const ExperimentConfig& c) { return c.dataset_dir.string(); },
            [](ExperimentConfig& c, std::string_view v) { c.dataset_dir = std::string(v); }},
        SNSCL_BOOL("run", "dump_reliability", Scope::run, dump_reliability),
        SNSCL_BOOL("run", "save_checkpoint", Scope::run, save_checkpoint),

        SNSCL_UINT("data", "seed", Scope::data, data_seed),
        SNSCL_UINT("data", "num_classes", Scope::data, blobs.num_classes),
        SNSCL_UINT("data", "dim", Scope::data, blobs.dim),
        SNSCL_UINT("data", "train_per_class", Scope::data, blobs.train_per_class),
        SNSCL_UINT("data", "test_per_class", Scope::data, blobs.test_per_class),
        SNSCL_UINT("data", "super_groups", Scope::data, blobs.super_groups),
        SNSCL_DOUBLE("data", "intra_spread", Scope::data, blobs.intra_spread),
        SNSCL_DOUBLE("data", "inter_spread", Scope::data, blobs.inter_spread),
        SNSCL_DOUBLE("data", "sample_std", Scope::data, blobs.sample_std),

        Key{"noise", "kind", Scope::data, [](const ExperimentConfig& c) { return data::to_string(c.noise_kind); },
            [](ExperimentConfig& c, std::string_view v) { c.noise_kind = data::parse_noise_kind(std::string(v)); }},
        SNSCL_DOUBLE("noise", "rate", Scope::data, noise_rate),

        SNSCL_UINT("train", "seed", Scope::other, training.seed),
        SNSCL_INT("train", "epochs", Scope::other, training.epochs),
        SNSCL_INT("train", "warmup_epochs", Scope::other, training.warmup_epochs),
        SNSCL_UINT("train", "batch_size", Scope::other, training.batch_size),
        SNSCL_DOUBLE("train", "lr", Scope::other, training.lr),
        SNSCL_DOUBLE("train", "lr_decay", Scope::other, training.lr_decay),
        Key{"train", "lr_milestones", Scope::other, [](const ExperimentConfig& c) { return join(c.training.lr_milestones); },
            [](ExperimentConfig& c, std::string_view v) { c.training.lr_milestones = parse_ints(v); }},
        SNSCL_DOUBLE("train", "momentum", Scope::other, training.momentum),
        SNSCL_DOUBLE("train", "weight_decay", Scope::other, training.weight_decay),
        Key{"train", "lnl", Scope::other, [](const ExperimentConfig& c) { return train::to_string(c.training.lnl.kind); },
            [](ExperimentConfig& c, std::string_view v) { c.training.lnl.kind = train::parse_loss_kind(std::string(v)); }},
        SNSCL_DOUBLE("train", "ls_epsilon", Scope::other, training.lnl.epsilon),
        SNSCL_DOUBLE("train", "gce_q", Scope::other, training.lnl.q),

        SNSCL_BOOL("snscl", "enabled", Scope::other, training.snscl),
        Key{"snscl", "ablation", Scope::other, [](const ExperimentConfig& c) { return ablation_string(c.training.ablation); },
            [](ExperimentConfig& c, std::string_view v) {
                c.training.ablation = train::Ablation{};
                if (v == "none") return;
                for (const auto& f : text::split(v, ',')) apply_ablation(c.training.ablation, std::string(text::trim(f)));
            }},
        SNSCL_DOUBLE("snscl", "threshold", Scope::other, training.threshold),
        SNSCL_UINT("snscl", "queue_size", Scope::other, training.queue_size),
        SNSCL_DOUBLE("snscl", "temperature", Scope::other, training.temperature),
        SNSCL_DOUBLE("snscl", "alpha", Scope::other, training.alpha),
        SNSCL_DOUBLE("snscl", "lambda_ntcl", Scope::other, training.lambda_ntcl),
        SNSCL_DOUBLE("snscl", "lambda_kl", Scope::other, training.lambda_kl),
        Key{"snscl", "correction_init", Scope::other,
            [](const ExperimentConfig& c) { return init_string(c.training.correction_init); },
            [](ExperimentConfig& c, std::string_view v) {
                if (v == "first_correction") c.training.correction_init = labels::CorrectionState::Init::first_correction;
                else if (v == "observed_label") c.training.correction_init = labels::CorrectionState::Init::observed_label;
                else throw std::invalid_argument("expected first_correction or observed_label");
            }},

        Key{"network", "backbone_hidden", Scope::other, [](const ExperimentConfig& c) { return join(c.training.backbone_hidden); },
            [](ExperimentConfig& c, std::string_view v) { c.training.backbone_hidden = parse_sizes(v); }},
        SNSCL_UINT("network", "embed_dim", Scope::other, training.embed_dim),
        Key{"network", "stochastic_hidden", Scope::other,
            [](const ExperimentConfig& c) { return join(c.training.stochastic_hidden); },
            [](ExperimentConfig& c, std::string_view v) { c.training.stochastic_hidden = parse_sizes(v); }},
        SNSCL_UINT("network", "fourier_features", Scope::other, training.fourier_features),
        SNSCL_DOUBLE("network", "fourier_scale", Scope::other, training.fourier_scale),
    };
    return table;
}

#undef SNSCL_UINT
#undef SNSCL_INT
#undef SNSCL_DOUBLE
#undef SNSCL_BOOL

std::string serialize(const ExperimentConfig& cfg, bool include(Scope)) {
    std::ostringstream os;
    std::string section;
    for (const auto& k : keys()) {
        if (!include(k.scope)) continue;
        if (k.section != section) {
            if (!section.empty()) os << '\n';
            section = k.section;
            os << '[' << section << "]\n";
        }
        os << k.name << " = " << k.get(cfg) << '\n';
    }
    return os.str();
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& origin) {
    IniDocument doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = text::trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ConfigError(fail_at(origin, line_no, "malformed section header"));
            section = std::string(text::trim(line.substr(1, line.size() - 2)));
            doc.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fail_at(origin, line_no, "expected 'key = value'"));
        if (section.empty()) throw ConfigError(fail_at(origin, line_no, "key outside of any section"));
        const std::string key(text::trim(line.substr(0, eq)));
        if (key.empty()) throw ConfigError(fail_at(origin, line_no, "empty key"));
        auto& entries = doc.sections[section];
        if (entries.count(key)) throw ConfigError(fail_at(origin, line_no, "duplicate key '" + key + "'"));
        entries[key] = {std::string(text::trim(line.substr(eq + 1))), line_no};
    }
    return doc;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    const IniDocument doc = parse_ini(text, origin);
    ExperimentConfig cfg;
    for (const auto& [section, entries] : doc.sections) {
        bool known_section = false;
        for (const auto& k : keys()) known_section |= section == k.section;
        if (!known_section) throw ConfigError(origin + ": unknown section [" + section + "]");
        for (const auto& [name, entry] : entries) {
            const Key* match = nullptr;
            for (const auto& k : keys()) {
                if (section == k.section && name == k.name) match = &k;
            }
            if (match == nullptr) {
                throw ConfigError(fail_at(origin, entry.line, "unknown key '" + name + "' in [" + section + "]"));
            }
            try {
                match->set(cfg, entry.value);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(fail_at(origin, entry.line, section + "." + name + ": " + e.what()));
            }
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_ini(const ExperimentConfig& cfg) {
    return serialize(cfg, [](Scope) { return true; });
}

std::string config_hash(const ExperimentConfig& cfg) {
    return text::hex64(text::fnv1a64(serialize(cfg, [](Scope s) { return s != Scope::run; })));
}

std::string data_hash(const ExperimentConfig& cfg) {
    return text::hex64(text::fnv1a64(serialize(cfg, [](Scope s) { return s == Scope::data; })));
}

data::BlobSpec ExperimentConfig::blob_spec() const {
    data::BlobSpec b = blobs;
    b.seed = data_seed;
    return b;
}

data::NoiseSpec ExperimentConfig::noise_spec() const { return {noise_kind, noise_rate, splitmix64(data_seed)}; }

void ExperimentConfig::validate() const {
    if (label.empty()) throw ConfigError("run.label must not be empty");
    if (out.empty()) throw ConfigError("run.out must not be empty");
    if (blobs.num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
    if (blobs.dim == 0) throw ConfigError("data.dim must be positive");
    if (blobs.train_per_class == 0 || blobs.test_per_class == 0) throw ConfigError("data: per-class counts must be positive");
    if (blobs.super_groups == 0 || blobs.num_classes % blobs.super_groups != 0) {
        throw ConfigError("data.super_groups must divide data.num_classes");
    }
    if (!(blobs.intra_spread < blobs.inter_spread)) throw ConfigError("data.intra_spread must be below inter_spread");
    if (!(blobs.sample_std > 0.0) || !(blobs.intra_spread >= 0.0) || !(blobs.inter_spread >= 0.0)) {
        throw ConfigError("data: spreads must be non-negative and sample_std positive");
    }
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise.rate must lie in [0, 1]");
    try {
        training.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void apply_ablation(train::Ablation& a, const std::string& name) {
    if (name == "no-correct") a.weight_correction = false;
    else if (name == "no-wupdate") a.weight_update = false;
    else if (name == "no-stoch") a.stochastic_module = false;
    else if (name == "plain_scl") a.plain_scl = true;
    else throw ConfigError("unknown ablation '" + name + "' (expected no-correct, no-wupdate, no-stoch or plain_scl)");
}

}  // namespace snscl::cli
