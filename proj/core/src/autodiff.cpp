#include "snscl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace snscl::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::param(Parameter& p) {
    Node n;
    n.value = p.value;
    n.param = &p;
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn fn) {
    if (!value.all_finite()) throw NumericError("non-finite value produced on tape");
    Node n;
    n.value = std::move(value);
    for (const Var& p : parents) {
        if (p.tape_ != this) throw std::invalid_argument("Tape::record: parent from another tape");
        n.parents.push_back(p.id_);
        n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n));
}

Tensor* Tape::grad_sink(std::size_t id) {
    Node& n = nodes_[id];
    return n.requires_grad ? &n.grad : nullptr;
}

void Tape::backward(Var root) {
    if (root.tape_ != this) throw std::invalid_argument("backward: root belongs to another tape");
    if (root.value().size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + root.value().shape_string());
    }
    if (backward_done_) throw std::logic_error("backward: already run on this tape");
    backward_done_ = true;

    for (std::size_t i = 0; i <= root.id_; ++i) {
        Node& n = nodes_[i];
        if (n.requires_grad) n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    if (!nodes_[root.id_].requires_grad) return;
    nodes_[root.id_].grad[0] = 1.0;

    for (std::size_t i = root.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward) n.backward(*this, i);
    }
    for (std::size_t i = 0; i <= root.id_; ++i) {
        Node& n = nodes_[i];
        if (n.param == nullptr) continue;
        Tensor& pg = n.param->grad;
        if (!pg.same_shape(n.grad)) pg = Tensor(n.grad.rows(), n.grad.cols());
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
}

namespace {

void require_same_tape(const Var& a, const Var& b, const char* op) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

bool is_scalar(const Tensor& t) { return t.rows() == 1 && t.cols() == 1; }

void check_binary(const Var& a, const Var& b, const char* op) {
    require_same_tape(a, b, op);
    if (!a.value().same_shape(b.value()) && !is_scalar(b.value())) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                                    b.value().shape_string());
    }
}

template <class F>
Tensor map(const Tensor& x, F f) {
    Tensor out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return out;
}

/// Unary elementwise op whose local derivative depends on input and output.
template <class Fwd, class Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
    Tensor out = map(x.value(), fwd);
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, deriv](Tape& t, std::size_t self) {
        Tensor* gx = t.grad_sink(xi);
        if (gx == nullptr) return;
        const Tensor& g = t.grad(self);
        const Tensor& in = t.value(xi);
        const Tensor& y = t.value(self);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * deriv(in[i], y[i]);
    });
}

double stable_softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b, "matmul");
    Tensor out = snscl::matmul(a.value(), b.value());
    const std::size_t ai = a.id();
    const std::size_t bi = b.id();
    return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (Tensor* ga = t.grad_sink(ai)) {
            Tensor d = matmul_nt(g, t.value(bi));
            for (std::size_t i = 0; i < d.size(); ++i) (*ga)[i] += d[i];
        }
        if (Tensor* gb = t.grad_sink(bi)) {
            Tensor d = matmul_tn(t.value(ai), g);
            for (std::size_t i = 0; i < d.size(); ++i) (*gb)[i] += d[i];
        }
    });
}

namespace {

enum class BinOp { add, sub, mul };

Var binary(Var a, Var b, BinOp op, const char* name) {
    check_binary(a, b, name);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool bcast = !av.same_shape(bv);
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = bcast ? bv[0] : bv[i];
        switch (op) {
            case BinOp::add: out[i] = av[i] + y; break;
            case BinOp::sub: out[i] = av[i] - y; break;
            case BinOp::mul: out[i] = av[i] * y; break;
        }
    }
    const std::size_t ai = a.id();
    const std::size_t bi = b.id();
    return a.tape().record(std::move(out), {a, b}, [ai, bi, bcast, op](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(ai);
        const Tensor& bv = t.value(bi);
        if (Tensor* ga = t.grad_sink(ai)) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                (*ga)[i] += op == BinOp::mul ? g[i] * (bcast ? bv[0] : bv[i]) : g[i];
            }
        }
        if (Tensor* gb = t.grad_sink(bi)) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                double d = g[i];
                if (op == BinOp::sub) d = -d;
                if (op == BinOp::mul) d *= av[i];
                (*gb)[bcast ? 0 : i] += d;
            }
        }
    });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::add, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::sub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::mul, "mul"); }

Var add_row(Var a, Var bias) {
    require_same_tape(a, bias, "add_row");
    const Tensor& av = a.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
        throw std::invalid_argument("add_row: bias " + bv.shape_string() + " incompatible with " + av.shape_string());
    }
    Tensor out = av;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
    }
    const std::size_t ai = a.id();
    const std::size_t bi = bias.id();
    return a.tape().record(std::move(out), {a, bias}, [ai, bi](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (Tensor* ga = t.grad_sink(ai)) {
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
        if (Tensor* gb = t.grad_sink(bi)) {
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) (*gb)[c] += g(r, c);
            }
        }
    });
}

Var relu(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var x) {
    return unary(x, stable_softplus, [](double in, double) { return sigmoid(in); });
}

Var exp(Var x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
    for (double v : x.value().data()) {
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
    }
    return unary(x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var neg(Var x) {
    return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(Var x, double k) {
    return unary(x, [k](double v) { return k * v; }, [k](double, double) { return k; });
}

Var add_scalar(Var x, double k) {
    return unary(x, [k](double v) { return v + k; }, [](double, double) { return 1.0; });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const std::size_t xi = x.id();
    return x.tape().record(Tensor::scalar(s), {x}, [xi](Tape& t, std::size_t self) {
        Tensor* gx = t.grad_sink(xi);
        if (gx == nullptr) return;
        const double g = t.grad(self)[0];
        for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
    });
}

Var mean(Var x) {
    const double n = static_cast<double>(x.value().size());
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(x), 1.0 / n);
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    if (begin >= end || end > xv.cols()) {
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                                    ") for " + xv.shape_string());
    }
    Tensor out(xv.rows(), end - begin);
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = xv(r, c);
    }
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, begin](Tape& t, std::size_t self) {
        Tensor* gx = t.grad_sink(xi);
        if (gx == nullptr) return;
        const Tensor& g = t.grad(self);
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) (*gx)(r, c + begin) += g(r, c);
        }
    });
}

Var l2_normalize_rows(Var x) {
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    std::vector<double> norms(xv.rows());
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        const double n = l2_norm(xv.row_span(r));
        if (!(n > 0.0)) throw NumericError("l2_normalize_rows: zero-norm row");
        norms[r] = n;
        for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) / n;
    }
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, norms = std::move(norms)](Tape& t, std::size_t self) {
        Tensor* gx = t.grad_sink(xi);
        if (gx == nullptr) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        // d(x/|x|) = (I - y y^T) / |x|
        for (std::size_t r = 0; r < g.rows(); ++r) {
            const double gy = dot(g.row_span(r), y.row_span(r));
            for (std::size_t c = 0; c < g.cols(); ++c) (*gx)(r, c) += (g(r, c) - gy * y(r, c)) / norms[r];
        }
    });
}

Var external_scalar(Var input, double value, Tensor input_grad) {
    if (!input_grad.same_shape(input.value())) {
        throw std::invalid_argument("external_scalar: gradient shape " + input_grad.shape_string() +
                                    " differs from input " + input.value().shape_string());
    }
    const std::size_t xi = input.id();
    return input.tape().record(Tensor::scalar(value), {input},
                               [xi, ig = std::move(input_grad)](Tape& t, std::size_t self) {
                                   Tensor* gx = t.grad_sink(xi);
                                   if (gx == nullptr) return;
                                   const double g = t.grad(self)[0];
                                   for (std::size_t i = 0; i < ig.size(); ++i) (*gx)[i] += g * ig[i];
                               });
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row_span(r);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            p(r, c) = std::exp(row[c] - m);
            z += p(r, c);
        }
        for (std::size_t c = 0; c < row.size(); ++c) p(r, c) /= z;
    }
    return p;
}

CrossEntropyResult softmax_cross_entropy(Var logits, const Tensor& targets) {
    const Tensor& lv = logits.value();
    if (!lv.same_shape(targets)) {
        throw std::invalid_argument("softmax_cross_entropy: targets " + targets.shape_string() + " vs logits " +
                                    lv.shape_string());
    }
    const std::size_t batch = lv.rows();
    if (batch == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
    for (std::size_t r = 0; r < batch; ++r) {
        double s = 0.0;
        for (double v : targets.row_span(r)) {
            if (v < 0.0) throw std::invalid_argument("softmax_cross_entropy: negative target");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw std::invalid_argument("softmax_cross_entropy: target row " + std::to_string(r) + " sums to " +
                                        std::to_string(s));
        }
    }

    std::vector<double> per_sample(batch, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        auto row = lv.row_span(r);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - m);
        const double lse = m + std::log(z);
        double l = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (targets(r, c) != 0.0) l += targets(r, c) * (lse - row[c]);
        }
        per_sample[r] = l;
        total += l;
    }

    const std::size_t li = logits.id();
    Var loss = logits.tape().record(Tensor::scalar(total / static_cast<double>(batch)), {logits},
                                    [li, targets](Tape& t, std::size_t self) {
                                        Tensor* gl = t.grad_sink(li);
                                        if (gl == nullptr) return;
                                        const double g = t.grad(self)[0] / static_cast<double>(targets.rows());
                                        const Tensor p = softmax_rows(t.value(li));
                                        for (std::size_t i = 0; i < p.size(); ++i) (*gl)[i] += g * (p[i] - targets[i]);
                                    });
    return {loss, std::move(per_sample)};
}

}  // namespace snscl::ad
