#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "snscl/tensor.hpp"

namespace snscl::ad {

/// A trainable array together with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so reverse insertion order is a valid topological order for backward.
class Tape {
public:
    /// Adds `upstream`-weighted adjoints into the parents of the node being visited.
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf that records a gradient (used by tests and gradient checks).
    Var variable(Tensor value);
    /// Leaf bound to a parameter; backward() adds its gradient into `p.grad`.
    Var param(Parameter& p);

    /// Records a new node. `fn` may be empty for non-differentiable results.
    Var record(Tensor value, std::vector<Var> parents, BackwardFn fn);

    /// Runs reverse accumulation from a scalar root. One call per tape.
    void backward(Var root);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    /// Gradient buffer of a parent, or nullptr when the parent needs no gradient.
    Tensor* grad_sink(std::size_t id);
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    Var push(Node n);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Binary elementwise ops accept identical shapes or
// a 1x1 right operand (scalar broadcast).
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a[m x n] + bias[1 x n] broadcast over rows.
Var add_row(Var a, Var bias);
Var relu(Var x);
/// log(1 + e^x), linear branch for x > 30.
Var softplus(Var x);
Var exp(Var x);
/// Throws std::domain_error on non-positive input.
Var log(Var x);
Var neg(Var x);
Var scale(Var x, double k);
Var add_scalar(Var x, double k);
Var sum(Var x);
Var mean(Var x);
/// Columns [begin, end) of x.
Var slice_cols(Var x, std::size_t begin, std::size_t end);
/// Each row divided by its Euclidean norm.
Var l2_normalize_rows(Var x);
/// Scalar node with a value and an input adjoint computed outside the tape.
/// Backward adds upstream * `input_grad` into `input`.
Var external_scalar(Var input, double value, Tensor input_grad);

struct CrossEntropyResult {
    Var loss;                         // mean over the batch
    std::vector<double> per_sample;   // -sum_c t_c log p_c
};

/// Softmax cross-entropy against soft targets (each row must sum to 1 within 1e-6).
CrossEntropyResult softmax_cross_entropy(Var logits, const Tensor& targets);

/// Row-wise softmax with max subtraction (plain, no graph).
Tensor softmax_rows(const Tensor& logits);

}  // namespace snscl::ad
