#include "snscl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "snscl/text.hpp"

namespace snscl::data {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + s + "'");
}

std::string to_string(NoiseKind k) { return k == NoiseKind::symmetric ? "symmetric" : "asymmetric"; }

NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "symmetric" || s == "sym") return NoiseKind::symmetric;
    if (s == "asymmetric" || s == "asym") return NoiseKind::asymmetric;
    throw std::invalid_argument("unknown noise kind '" + s + "'");
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<double> random_unit(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> u(d);
    double norm = 0.0;
    while (norm < 1e-12) {
        for (double& x : u) x = n(rng);
        norm = l2_norm(u);
    }
    for (double& x : u) x /= norm;
    return u;
}

/// Super-cluster centers with pairwise distance >= inter_spread, by rejection
/// in a cube that grows whenever placement stalls.
Tensor place_super_centers(std::size_t groups, std::size_t d, double inter_spread, std::mt19937_64& rng) {
    Tensor centers(groups, d);
    const double per_axis = std::ceil(std::pow(static_cast<double>(groups), 1.0 / static_cast<double>(d)));
    double half_width = 0.75 * inter_spread * per_axis;
    std::size_t placed = 0;
    int stalls = 0;
    while (placed < groups) {
        std::uniform_real_distribution<double> u(-half_width, half_width);
        for (std::size_t k = 0; k < d; ++k) centers(placed, k) = u(rng);
        bool ok = true;
        for (std::size_t j = 0; j < placed && ok; ++j) {
            ok = distance(centers.row_span(placed), centers.row_span(j)) >= inter_spread;
        }
        if (ok) {
            ++placed;
            stalls = 0;
        } else if (++stalls > 1000) {
            half_width *= 1.1;
            stalls = 0;
        }
    }
    return centers;
}

}  // namespace

DatasetPair make_fine_grained_blobs(const BlobSpec& spec) {
    if (spec.num_classes < 2) throw std::invalid_argument("make_fine_grained_blobs: need at least 2 classes");
    if (spec.dim == 0) throw std::invalid_argument("make_fine_grained_blobs: dim must be positive");
    if (spec.super_groups == 0 || spec.num_classes % spec.super_groups != 0) {
        throw std::invalid_argument("make_fine_grained_blobs: classes must divide evenly into super groups");
    }
    if (!(spec.intra_spread < spec.inter_spread)) {
        throw std::invalid_argument("make_fine_grained_blobs: intra_spread must be below inter_spread");
    }
    if (spec.train_per_class == 0) throw std::invalid_argument("make_fine_grained_blobs: empty classes");

    std::mt19937_64 rng(spec.seed);
    const std::size_t d = spec.dim;
    const std::size_t per_group = spec.num_classes / spec.super_groups;
    const Tensor supers = place_super_centers(spec.super_groups, d, spec.inter_spread, rng);

    // Class c belongs to super group c / per_group. Siblings are kept at least
    // intra_spread apart so no pair collapses onto one center.
    Tensor centers(spec.num_classes, d);
    for (std::size_t g = 0; g < spec.super_groups; ++g) {
        for (std::size_t s = 0; s < per_group; ++s) {
            const std::size_t c = g * per_group + s;
            for (int attempt = 0;; ++attempt) {
                const auto u = random_unit(d, rng);
                for (std::size_t k = 0; k < d; ++k) centers(c, k) = supers(g, k) + spec.intra_spread * u[k];
                bool ok = true;
                for (std::size_t j = g * per_group; j < c && ok; ++j) {
                    ok = distance(centers.row_span(c), centers.row_span(j)) >= spec.intra_spread;
                }
                if (ok || attempt > 1000) break;
            }
        }
    }

    std::normal_distribution<double> noise(0.0, spec.sample_std);
    auto draw = [&](Split split, std::size_t per_class) {
        Dataset ds;
        ds.num_classes = spec.num_classes;
        ds.dim = d;
        ds.split = split;
        ds.samples.reserve(per_class * spec.num_classes);
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            for (std::size_t i = 0; i < per_class; ++i) {
                SampleRecord r;
                r.id = ds.samples.size();
                r.features.resize(d);
                for (std::size_t k = 0; k < d; ++k) r.features[k] = centers(c, k) + noise(rng);
                r.clean_label = static_cast<int>(c);
                r.noisy_label = r.clean_label;
                ds.samples.push_back(std::move(r));
            }
        }
        return ds;
    };

    DatasetPair out;
    out.train = draw(Split::train, spec.train_per_class);
    out.test = draw(Split::test, spec.test_per_class);
    out.class_centers = centers;

    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    const double n = static_cast<double>(out.train.size());
    for (const auto& r : out.train.samples) {
        for (std::size_t k = 0; k < d; ++k) mu[k] += r.features[k] / n;
    }
    for (const auto& r : out.train.samples) {
        for (std::size_t k = 0; k < d; ++k) sd[k] += (r.features[k] - mu[k]) * (r.features[k] - mu[k]) / n;
    }
    for (double& s : sd) s = s > 0.0 ? std::sqrt(s) : 1.0;
    for (Dataset* ds : {&out.train, &out.test}) {
        for (auto& r : ds->samples) {
            for (std::size_t k = 0; k < d; ++k) r.features[k] = (r.features[k] - mu[k]) / sd[k];
        }
    }
    return out;
}

TransitionMatrix::TransitionMatrix(Tensor t) : t_(std::move(t)) {
    if (t_.rows() != t_.cols() || t_.rows() < 2) {
        throw std::invalid_argument("TransitionMatrix: expected square matrix with C >= 2, got " + t_.shape_string());
    }
    for (std::size_t i = 0; i < t_.rows(); ++i) {
        double s = 0.0;
        for (double v : t_.row_span(i)) {
            if (v < 0.0) throw std::invalid_argument("TransitionMatrix: negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) {
            throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
}

TransitionMatrix build_transition(const NoiseSpec& spec, std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("build_transition: need at least 2 classes");
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
        throw std::invalid_argument("build_transition: rate must lie in [0, 1)");
    }
    const double r = spec.rate;
    Tensor t(num_classes, num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) {
        if (spec.kind == NoiseKind::symmetric) {
            for (std::size_t j = 0; j < num_classes; ++j) {
                t(i, j) = i == j ? 1.0 - r : r / static_cast<double>(num_classes - 1);
            }
        } else {
            t(i, i) = 1.0 - r;
            t(i, (i + 1) % num_classes) = r;
        }
    }
    return TransitionMatrix(std::move(t));
}

InjectionResult inject_noise(Dataset dataset, const TransitionMatrix& t, std::uint64_t seed) {
    if (dataset.split != Split::train) throw std::invalid_argument("inject_noise: only the train split takes noise");
    if (t.num_classes() != dataset.num_classes) {
        throw std::invalid_argument("inject_noise: transition matrix is " + t.matrix().shape_string() +
                                    " but dataset has " + std::to_string(dataset.num_classes) + " classes");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t c = t.num_classes();
    std::size_t flipped = 0;
    for (auto& r : dataset.samples) {
        const auto clean = static_cast<std::size_t>(r.clean_label);
        const double x = u(rng);
        double acc = 0.0;
        std::size_t j = 0;
        for (; j + 1 < c; ++j) {
            acc += t(clean, j);
            if (x < acc) break;
        }
        // Floating round-off can leave x past the last partial sum; fall back
        // to the last class with positive mass.
        while (t(clean, j) == 0.0 && j > 0) --j;
        r.noisy_label = static_cast<int>(j);
        if (r.noisy_label != r.clean_label) ++flipped;
    }
    return {std::move(dataset), flipped};
}

double empirical_noise_rate(const Dataset& dataset) {
    if (dataset.samples.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const auto& r : dataset.samples) wrong += r.noisy_label != r.clean_label ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

TrainingView training_view(const Dataset& dataset) {
    TrainingView v;
    v.num_classes = dataset.num_classes;
    v.features = Tensor(dataset.size(), dataset.dim);
    v.labels.reserve(dataset.size());
    v.ids.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& r = dataset.samples[i];
        std::copy(r.features.begin(), r.features.end(), v.features.row_span(i).begin());
        v.labels.push_back(r.noisy_label);
        v.ids.push_back(r.id);
    }
    return v;
}

EvalView eval_view(const Dataset& test) {
    EvalView v;
    v.num_classes = test.num_classes;
    v.features = Tensor(test.size(), test.dim);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& r = test.samples[i];
        if (r.noisy_label != r.clean_label) throw std::invalid_argument("eval_view: evaluation split carries label noise");
        std::copy(r.features.begin(), r.features.end(), v.features.row_span(i).begin());
        v.labels.push_back(r.clean_label);
    }
    return v;
}

CleanLabelVault::CleanLabelVault(const Dataset& train) {
    labels_.reserve(train.size());
    for (const auto& r : train.samples) labels_.push_back(r.clean_label);
}

int CleanLabelVault::label(std::size_t index) const {
    ++reads_;
    return labels_.at(index);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset,
                       const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto& c : comments) out << "# " << c << '\n';
    out << "id,split,clean_label,noisy_label";
    for (std::size_t k = 0; k < dataset.dim; ++k) out << ",f_" << k;
    out << '\n';
    const std::string split = to_string(dataset.split);
    for (const auto& r : dataset.samples) {
        out << r.id << ',' << split << ',' << r.clean_label << ',' << r.noisy_label;
        for (double f : r.features) out << ',' << text::format_double(f);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    std::string line;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = text::split(line, ',');
        break;
    }
    if (header.size() < 5 || header[0] != "id" || header[1] != "split" || header[2] != "clean_label" ||
        header[3] != "noisy_label") {
        throw std::runtime_error(path.string() + ": missing or malformed header row");
    }
    Dataset ds;
    ds.dim = header.size() - 4;
    for (std::size_t k = 0; k < ds.dim; ++k) {
        if (header[4 + k] != "f_" + std::to_string(k)) {
            throw std::runtime_error(path.string() + ": unexpected feature column '" + header[4 + k] + "'");
        }
    }
    bool first = true;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != header.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        try {
            SampleRecord r;
            r.id = text::parse_uint(fields[0]);
            const Split split = parse_split(std::string(text::trim(fields[1])));
            if (first) {
                ds.split = split;
                first = false;
            } else if (split != ds.split) {
                throw std::invalid_argument("mixed splits in one file");
            }
            r.clean_label = static_cast<int>(text::parse_int(fields[2]));
            r.noisy_label = static_cast<int>(text::parse_int(fields[3]));
            if (r.clean_label < 0 || r.noisy_label < 0) throw std::invalid_argument("negative label");
            r.features.reserve(ds.dim);
            for (std::size_t k = 0; k < ds.dim; ++k) r.features.push_back(text::parse_double(fields[4 + k]));
            max_label = std::max({max_label, r.clean_label, r.noisy_label});
            ds.samples.push_back(std::move(r));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    ds.num_classes = num_classes.value_or(static_cast<std::size_t>(max_label + 1));
    if (max_label >= static_cast<int>(ds.num_classes)) {
        throw std::runtime_error(path.string() + ": label out of range for " + std::to_string(ds.num_classes) +
                                 " classes");
    }
    return ds;
}

}  // namespace snscl::data
