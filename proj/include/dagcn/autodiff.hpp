#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dagcn/matrix.hpp"

// Tape-based reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records every operation applied to tensors created on it. Tensors are
// lightweight handles (tape, node index); the tape owns values and gradients.
// One tape per forward pass: record, call backward() once, read gradients.
namespace dagcn::autodiff {

enum class OpKind {
    Leaf,
    MatMul,
    Add,
    AddRowBroadcast,
    Relu,
    Tanh,
    SoftmaxRows,
    ConcatCols,
    Transpose,
    SliceCol,
    ScaleRows,
    Hadamard,
    Sum,
    Flatten,
    Scale,
    NegLogPick,
};

const char* op_name(OpKind op) noexcept;

class Tape;

class Tensor {
public:
    Tensor() = default;

    const Matrix& value() const;
    /// Gradient after backward(); an empty 0x0 matrix if none was accumulated.
    const Matrix& grad() const;
    bool has_grad() const;
    bool requires_grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool valid() const noexcept { return tape_ != nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }

private:
    friend class Tape;
    Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor leaf(Matrix value, bool requires_grad = true);
    Tensor constant(Matrix value) { return leaf(std::move(value), false); }

    /// Reverse sweep from a 1x1 loss. May be called once per tape.
    void backward(const Tensor& loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    bool consumed() const noexcept { return consumed_; }
    /// Number of nodes whose backward rule ran during the last sweep.
    std::size_t visited() const noexcept { return visited_; }

private:
    friend class Tensor;
    friend struct OpRecorder;

    struct Node {
        OpKind op = OpKind::Leaf;
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        double scalar = 0.0;     // Scale factor, NegLogPick clamp
        std::size_t index = 0;   // SliceCol column, NegLogPick label
    };

    Tensor record(OpKind op, Matrix value, std::vector<std::size_t> inputs, double scalar = 0.0,
                  std::size_t index = 0);
    const Node& node(std::size_t id) const { return nodes_[id]; }
    Matrix& grad_buffer(std::size_t id);
    void run_backward(std::size_t id);

    std::deque<Node> nodes_;  // references from value()/grad() survive later records
    bool consumed_ = false;
    std::size_t visited_ = 0;
};

// Operations. Every input must live on the same tape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// a[n x c] + bias[1 x c] broadcast over rows.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Softmax along each row, stabilized by subtracting the row max.
Tensor softmax_rows(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor transpose(const Tensor& a);
/// Column j of a as an n x 1 tensor.
Tensor slice_col(const Tensor& a, std::size_t j);
/// Row i of a multiplied by w(i, 0); w is n x 1.
Tensor scale_rows(const Tensor& a, const Tensor& w);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// Sum of all entries as 1x1.
Tensor sum(const Tensor& a);
/// Row-major reshape to 1 x (rows * cols).
Tensor flatten(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
/// -log(max(p(0, label), clamp)) for a 1 x L probability row.
Tensor neg_log_pick(const Tensor& probs, std::size_t label, double clamp = 1e-12);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) per entry.
Matrix finite_difference_grad(const std::function<double(const Matrix&)>& f, const Matrix& at, double eps = 1e-5);

/// Test fixture: while alive, the backward rule of `op` on this thread is
/// scaled by `factor`, so gradient oracles can prove they detect a broken rule.
class ScopedBackwardFault {
public:
    ScopedBackwardFault(OpKind op, double factor);
    ~ScopedBackwardFault();
    ScopedBackwardFault(const ScopedBackwardFault&) = delete;
    ScopedBackwardFault& operator=(const ScopedBackwardFault&) = delete;

private:
    bool previous_active_;
    OpKind previous_op_;
    double previous_factor_;
};

}  // namespace dagcn::autodiff
