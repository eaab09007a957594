#include "snscl/stochastic_encoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace snscl::encoder {

namespace {

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    if (out != 0) w.push_back(out);
    return w;
}

}  // namespace

Network::Network(const NetworkConfig& cfg) : cfg_(cfg) {
    if (cfg.backbone_hidden.empty()) throw std::invalid_argument("Network: backbone needs at least one layer");
    if (cfg.stochastic_hidden.size() != 2) {
        throw std::invalid_argument("Network: stochastic module is exactly three layers (two hidden widths)");
    }
    if (cfg.num_classes < 2 || cfg.embed_dim == 0) throw std::invalid_argument("Network: bad class/embedding size");
    const std::size_t feat = cfg.backbone_hidden.back();
    const std::size_t in = cfg.fourier_features > 0 ? 2 * cfg.fourier_features : cfg.input_dim;
    if (cfg.fourier_features > 0) fourier_ = Tensor(cfg.fourier_features, cfg.input_dim);
    backbone_ = nn::Mlp("backbone", widths(in, cfg.backbone_hidden, 0), /*relu_last=*/true);
    head_ = nn::Linear("head", feat, cfg.num_classes);
    projector_ = nn::Linear("projector", feat, cfg.embed_dim);
    stochastic_ = nn::Mlp("stochastic", widths(cfg.embed_dim, cfg.stochastic_hidden, 2 * cfg.embed_dim),
                          /*relu_last=*/false);
}

void Network::init(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, cfg_.fourier_scale);
    for (double& v : fourier_.data()) v = n(rng);
    backbone_.init(rng);
    head_.init(rng);
    projector_.init(rng);
    stochastic_.init(rng);
}

Tensor Network::lift(const Tensor& x) const {
    if (cfg_.fourier_features == 0) return x;
    if (x.cols() != cfg_.input_dim) throw std::invalid_argument("Network::lift: input width mismatch");
    const Tensor proj = matmul_nt(x, fourier_);
    const std::size_t m = cfg_.fourier_features;
    Tensor out(x.rows(), 2 * m);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t k = 0; k < m; ++k) {
            const double a = 2.0 * std::numbers::pi * proj(r, k);
            out(r, k) = std::cos(a);
            out(r, m + k) = std::sin(a);
        }
    }
    return out;
}

ad::Var Network::backbone(ad::Tape& tape, ad::Var x) {
    if (cfg_.fourier_features > 0) x = tape.constant(lift(x.value()));
    return backbone_.forward(tape, x);
}
ad::Var Network::classify(ad::Tape& tape, ad::Var z) { return head_.forward(tape, z); }
ad::Var Network::project(ad::Tape& tape, ad::Var z) { return projector_.forward(tape, z); }

GaussianEmbedding Network::encode(ad::Tape& tape, ad::Var z) {
    ad::Var h = stochastic_.forward(tape, project(tape, z));
    const std::size_t d = cfg_.embed_dim;
    ad::Var mean = ad::slice_cols(h, 0, d);
    ad::Var stddev = ad::add_scalar(ad::softplus(ad::slice_cols(h, d, 2 * d)), kSigmaFloor);
    return {mean, stddev};
}

Tensor Network::backbone(const Tensor& x) const { return backbone_.forward(lift(x)); }
Tensor Network::logits(const Tensor& x) const { return head_.forward(backbone(x)); }

std::vector<ad::Parameter*> Network::parameters() {
    std::vector<ad::Parameter*> out;
    backbone_.collect(out);
    out.push_back(&head_.weight());
    out.push_back(&head_.bias());
    out.push_back(&projector_.weight());
    out.push_back(&projector_.bias());
    stochastic_.collect(out);
    return out;
}

std::vector<const ad::Parameter*> Network::parameters() const {
    std::vector<const ad::Parameter*> out;
    backbone_.collect(out);
    out.push_back(&head_.weight());
    out.push_back(&head_.bias());
    out.push_back(&projector_.weight());
    out.push_back(&projector_.bias());
    stochastic_.collect(out);
    return out;
}

std::vector<const ad::Parameter*> Network::classifier_parameters() const {
    std::vector<const ad::Parameter*> out;
    backbone_.collect(out);
    out.push_back(&head_.weight());
    out.push_back(&head_.bias());
    return out;
}

ad::Var sample(const GaussianEmbedding& ge, const Tensor& eps) {
    if (!eps.same_shape(ge.mean.value())) {
        throw std::invalid_argument("sample: noise shape " + eps.shape_string() + " vs embedding " +
                                    ge.mean.value().shape_string());
    }
    ad::Tape& tape = ge.mean.tape();
    return ad::add(ge.mean, ad::mul(tape.constant(eps), ge.stddev));
}

Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t(rows, cols);
    for (double& v : t.data()) v = n(rng);
    return t;
}

ad::Var kl_to_unit(const GaussianEmbedding& ge) {
    const double batch = static_cast<double>(ge.mean.rows());
    ad::Var mu2 = ad::mul(ge.mean, ge.mean);
    ad::Var s2 = ad::mul(ge.stddev, ge.stddev);
    ad::Var log_s2 = ad::scale(ad::log(ge.stddev), 2.0);
    ad::Var terms = ad::sub(ad::add(mu2, s2), ad::add_scalar(log_s2, 1.0));
    return ad::scale(ad::sum(terms), 0.5 / batch);
}

double kl_to_unit(std::span<const double> mean, std::span<const double> stddev) {
    if (mean.size() != stddev.size()) throw std::invalid_argument("kl_to_unit: length mismatch");
    double kl = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
        if (!(stddev[j] > 0.0)) throw std::invalid_argument("kl_to_unit: stddev must be positive");
        const double s2 = stddev[j] * stddev[j];
        kl += mean[j] * mean[j] + s2 - 1.0 - std::log(s2);
    }
    return 0.5 * kl;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto& c : comments) out << "# " << c << '\n';
    const auto params = net.parameters();
    out << "snscl-checkpoint 1\n" << params.size() << '\n';
    char buf[64];
    for (const auto* p : params) {
        out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", p->value[i]);
            out << (i ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void load_checkpoint(const std::filesystem::path& path, Network& net) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    while (in >> std::ws && in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
    }
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    in >> magic >> version >> count;
    if (magic != "snscl-checkpoint" || version != 1) throw std::runtime_error("unsupported checkpoint format");
    auto params = net.parameters();
    if (count != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
    for (auto* p : params) {
        std::string name;
        std::size_t rows = 0, cols = 0;
        in >> name >> rows >> cols;
        if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
            throw std::runtime_error("checkpoint entry '" + name + "' does not match parameter '" + p->name + "'");
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            std::string tok;
            in >> tok;
            char* end = nullptr;
            p->value[i] = std::strtod(tok.c_str(), &end);
            if (tok.empty() || end != tok.c_str() + tok.size()) throw std::runtime_error("bad checkpoint value");
        }
    }
    if (!in) throw std::runtime_error("truncated checkpoint '" + path.string() + "'");
}

}  // namespace snscl::encoder
