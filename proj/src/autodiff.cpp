#include "dagcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dagcn/kernels.hpp"

namespace dagcn::autodiff {

namespace {

struct FaultState {
    bool active = false;
    OpKind op = OpKind::Leaf;
    double factor = 1.0;
};

thread_local FaultState g_fault;

}  // namespace

const char* op_name(OpKind op) noexcept {
    switch (op) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::AddRowBroadcast: return "add_row_broadcast";
        case OpKind::Relu: return "relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::SoftmaxRows: return "softmax_rows";
        case OpKind::ConcatCols: return "concat_cols";
        case OpKind::Transpose: return "transpose";
        case OpKind::SliceCol: return "slice_col";
        case OpKind::ScaleRows: return "scale_rows";
        case OpKind::Hadamard: return "hadamard";
        case OpKind::Sum: return "sum";
        case OpKind::Flatten: return "flatten";
        case OpKind::Scale: return "scale";
        case OpKind::NegLogPick: return "neg_log_pick";
    }
    return "?";
}

ScopedBackwardFault::ScopedBackwardFault(OpKind op, double factor)
    : previous_active_(g_fault.active), previous_op_(g_fault.op), previous_factor_(g_fault.factor) {
    g_fault = {true, op, factor};
}

ScopedBackwardFault::~ScopedBackwardFault() {
    g_fault = {previous_active_, previous_op_, previous_factor_};
}

// --- Tensor ---------------------------------------------------------------

const Matrix& Tensor::value() const {
    if (tape_ == nullptr) throw StateError("use of an unbound tensor handle");
    return tape_->node(id_).value;
}

const Matrix& Tensor::grad() const {
    if (tape_ == nullptr) throw StateError("use of an unbound tensor handle");
    return tape_->node(id_).grad;
}

bool Tensor::has_grad() const { return !grad().empty(); }

bool Tensor::requires_grad() const {
    if (tape_ == nullptr) throw StateError("use of an unbound tensor handle");
    return tape_->node(id_).requires_grad;
}

// --- Tape -----------------------------------------------------------------

struct OpRecorder {
    static Tensor record(Tape& tape, OpKind op, Matrix value, std::vector<std::size_t> inputs,
                         double scalar = 0.0, std::size_t index = 0) {
        return tape.record(op, std::move(value), std::move(inputs), scalar, index);
    }
};

Tensor Tape::leaf(Matrix value, bool requires_grad) {
    if (consumed_) throw StateError("tape already consumed by backward()");
    Node n;
    n.op = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(OpKind op, Matrix value, std::vector<std::size_t> inputs, double scalar, std::size_t index) {
    if (consumed_) throw StateError("tape already consumed by backward()");
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](std::size_t i) { return nodes_[i].requires_grad; });
    n.inputs = std::move(inputs);
    n.scalar = scalar;
    n.index = index;
    nodes_.push_back(std::move(n));
    return Tensor(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this) throw ContractError("backward: loss tensor was not recorded on this tape");
    if (consumed_) throw StateError("backward: called twice on the same tape");
    const Matrix& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss must be 1x1, got " + lv.shape());
    }
    consumed_ = true;
    visited_ = 0;
    grad_buffer(loss.id())(0, 0) = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        ++visited_;
        const Node& n = nodes_[id];
        if (n.op == OpKind::Leaf || !n.requires_grad || n.grad.empty()) continue;
        run_backward(id);
    }
}

void Tape::run_backward(std::size_t id) {
    const auto& k = kernels::active();
    Matrix upstream;
    const Matrix* gp = &nodes_[id].grad;
    if (g_fault.active && g_fault.op == nodes_[id].op) {
        upstream = *gp;
        for (double& v : upstream.values()) v *= g_fault.factor;
        gp = &upstream;
    }
    const Matrix& g = *gp;
    const Node& n = nodes_[id];
    auto wants = [this](std::size_t input) { return nodes_[input].requires_grad; };

    switch (n.op) {
        case OpKind::Leaf: break;
        case OpKind::MatMul: {
            const std::size_t ai = n.inputs[0], bi = n.inputs[1];
            const Matrix& a = nodes_[ai].value;
            const Matrix& b = nodes_[bi].value;
            if (wants(ai)) k.gemm_nt(a.rows(), b.cols(), a.cols(), g.data(), b.data(), grad_buffer(ai).data());
            if (wants(bi)) k.gemm_tn(b.rows(), a.rows(), b.cols(), a.data(), g.data(), grad_buffer(bi).data());
            break;
        }
        case OpKind::Add:
            for (std::size_t in : n.inputs) {
                if (wants(in)) k.axpy(g.size(), 1.0, g.data(), grad_buffer(in).data());
            }
            break;
        case OpKind::AddRowBroadcast: {
            const std::size_t ai = n.inputs[0], bi = n.inputs[1];
            if (wants(ai)) k.axpy(g.size(), 1.0, g.data(), grad_buffer(ai).data());
            if (wants(bi)) {
                Matrix& gb = grad_buffer(bi);
                for (std::size_t r = 0; r < g.rows(); ++r) k.axpy(g.cols(), 1.0, g.row(r).data(), gb.data());
            }
            break;
        }
        case OpKind::Relu: {
            const std::size_t ai = n.inputs[0];
            const Matrix& x = nodes_[ai].value;
            Matrix& ga = grad_buffer(ai);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
            }
            break;
        }
        case OpKind::Tanh: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value.data()[i];
                ga.data()[i] += g.data()[i] * (1.0 - y * y);
            }
            break;
        }
        case OpKind::SoftmaxRows: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            const Matrix& y = n.value;
            for (std::size_t r = 0; r < y.rows(); ++r) {
                const double inner = k.dot(y.cols(), g.row(r).data(), y.row(r).data());
                for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - inner);
            }
            break;
        }
        case OpKind::ConcatCols: {
            std::size_t offset = 0;
            for (std::size_t in : n.inputs) {
                const std::size_t w = nodes_[in].value.cols();
                if (wants(in)) {
                    Matrix& gi = grad_buffer(in);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        k.axpy(w, 1.0, g.row(r).data() + offset, gi.row(r).data());
                    }
                }
                offset += w;
            }
            break;
        }
        case OpKind::Transpose: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
            }
            break;
        }
        case OpKind::SliceCol: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            for (std::size_t r = 0; r < g.rows(); ++r) ga(r, n.index) += g(r, 0);
            break;
        }
        case OpKind::ScaleRows: {
            const std::size_t ai = n.inputs[0], wi = n.inputs[1];
            const Matrix& a = nodes_[ai].value;
            const Matrix& w = nodes_[wi].value;
            if (wants(ai)) {
                Matrix& ga = grad_buffer(ai);
                for (std::size_t r = 0; r < a.rows(); ++r) k.axpy(a.cols(), w(r, 0), g.row(r).data(), ga.row(r).data());
            }
            if (wants(wi)) {
                Matrix& gw = grad_buffer(wi);
                for (std::size_t r = 0; r < a.rows(); ++r) gw(r, 0) += k.dot(a.cols(), g.row(r).data(), a.row(r).data());
            }
            break;
        }
        case OpKind::Hadamard: {
            const std::size_t ai = n.inputs[0], bi = n.inputs[1];
            const Matrix& a = nodes_[ai].value;
            const Matrix& b = nodes_[bi].value;
            if (wants(ai)) {
                Matrix& ga = grad_buffer(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * b.data()[i];
            }
            if (wants(bi)) {
                Matrix& gb = grad_buffer(bi);
                for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * a.data()[i];
            }
            break;
        }
        case OpKind::Sum: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            for (double& v : ga.values()) v += g(0, 0);
            break;
        }
        case OpKind::Flatten: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            k.axpy(g.size(), 1.0, g.data(), ga.data());
            break;
        }
        case OpKind::Scale: {
            Matrix& ga = grad_buffer(n.inputs[0]);
            k.axpy(g.size(), n.scalar, g.data(), ga.data());
            break;
        }
        case OpKind::NegLogPick: {
            const std::size_t pi = n.inputs[0];
            const double p = nodes_[pi].value(0, n.index);
            if (p > n.scalar) grad_buffer(pi)(0, n.index) += -g(0, 0) / p;
            break;
        }
    }
}

// --- operations -----------------------------------------------------------

namespace {

Tape& common_tape(const Tensor& a, const char* what) {
    if (!a.valid()) throw StateError(std::string(what) + ": unbound tensor");
    return *a.tape();
}

Tape& common_tape(const Tensor& a, const Tensor& b, const char* what) {
    Tape& t = common_tape(a, what);
    if (b.tape() != &t) throw ContractError(std::string(what) + ": operands recorded on different tapes");
    return t;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

template <class F>
Matrix map(const Matrix& a, F f) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i]);
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tape& t = common_tape(a, b, "matmul");
    return OpRecorder::record(t, OpKind::MatMul, kernels::matmul(a.value(), b.value()), {a.id(), b.id()});
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tape& t = common_tape(a, b, "add");
    require_same_shape(a.value(), b.value(), "add");
    Matrix out = a.value();
    kernels::active().axpy(out.size(), 1.0, b.value().data(), out.data());
    return OpRecorder::record(t, OpKind::Add, std::move(out), {a.id(), b.id()});
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
    Tape& t = common_tape(a, bias, "add_row_broadcast");
    const Matrix& av = a.value();
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
        throw DimensionError("add_row_broadcast: bias " + bv.shape() + " does not match " + av.shape());
    }
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r) kernels::active().axpy(out.cols(), 1.0, bv.data(), out.row(r).data());
    return OpRecorder::record(t, OpKind::AddRowBroadcast, std::move(out), {a.id(), bias.id()});
}

Tensor relu(const Tensor& a) {
    Tape& t = common_tape(a, "relu");
    return OpRecorder::record(t, OpKind::Relu, map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a.id()});
}

Tensor tanh(const Tensor& a) {
    Tape& t = common_tape(a, "tanh");
    return OpRecorder::record(t, OpKind::Tanh, map(a.value(), [](double x) { return std::tanh(x); }), {a.id()});
}

Tensor softmax_rows(const Tensor& a) {
    Tape& t = common_tape(a, "softmax_rows");
    const Matrix& x = a.value();
    Matrix y(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        auto out = y.row(r);
        if (in.empty()) continue;
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = std::exp(in[c] - mx);
            total += out[c];
        }
        for (double& v : out) v /= total;
    }
    return OpRecorder::record(t, OpKind::SoftmaxRows, std::move(y), {a.id()});
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    Tape& t = common_tape(parts[0], "concat_cols");
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids;
    ids.reserve(parts.size());
    for (const Tensor& p : parts) {
        if (p.tape() != &t) throw ContractError("concat_cols: parts recorded on different tapes");
        if (p.rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + parts[0].value().shape() + " vs " + p.value().shape());
        }
        cols += p.cols();
        ids.push_back(p.id());
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const Matrix& v = p.value();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += v.cols();
    }
    return OpRecorder::record(t, OpKind::ConcatCols, std::move(out), std::move(ids));
}

Tensor transpose(const Tensor& a) {
    Tape& t = common_tape(a, "transpose");
    const Matrix& x = a.value();
    Matrix out(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
    }
    return OpRecorder::record(t, OpKind::Transpose, std::move(out), {a.id()});
}

Tensor slice_col(const Tensor& a, std::size_t j) {
    Tape& t = common_tape(a, "slice_col");
    const Matrix& x = a.value();
    if (j >= x.cols()) {
        throw DimensionError("slice_col: column " + std::to_string(j) + " out of range for " + x.shape());
    }
    Matrix out(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, 0) = x(r, j);
    return OpRecorder::record(t, OpKind::SliceCol, std::move(out), {a.id()}, 0.0, j);
}

Tensor scale_rows(const Tensor& a, const Tensor& w) {
    Tape& t = common_tape(a, w, "scale_rows");
    const Matrix& x = a.value();
    const Matrix& wv = w.value();
    if (wv.cols() != 1 || wv.rows() != x.rows()) {
        throw DimensionError("scale_rows: weights " + wv.shape() + " do not match " + x.shape());
    }
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (double& v : out.row(r)) v *= wv(r, 0);
    }
    return OpRecorder::record(t, OpKind::ScaleRows, std::move(out), {a.id(), w.id()});
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tape& t = common_tape(a, b, "hadamard");
    require_same_shape(a.value(), b.value(), "hadamard");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
    return OpRecorder::record(t, OpKind::Hadamard, std::move(out), {a.id(), b.id()});
}

Tensor sum(const Tensor& a) {
    Tape& t = common_tape(a, "sum");
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return OpRecorder::record(t, OpKind::Sum, Matrix(1, 1, s), {a.id()});
}

Tensor flatten(const Tensor& a) {
    Tape& t = common_tape(a, "flatten");
    const Matrix& x = a.value();
    Matrix out(1, x.size());
    std::copy(x.values().begin(), x.values().end(), out.data());
    return OpRecorder::record(t, OpKind::Flatten, std::move(out), {a.id()});
}

Tensor scale(const Tensor& a, double factor) {
    Tape& t = common_tape(a, "scale");
    return OpRecorder::record(t, OpKind::Scale, map(a.value(), [factor](double x) { return factor * x; }), {a.id()},
                              factor);
}

Tensor neg_log_pick(const Tensor& probs, std::size_t label, double clamp) {
    Tape& t = common_tape(probs, "neg_log_pick");
    const Matrix& p = probs.value();
    if (p.rows() != 1) throw DimensionError("neg_log_pick: expected a 1xL row, got " + p.shape());
    if (label >= p.cols()) {
        throw ContractError("neg_log_pick: label " + std::to_string(label) + " out of range for " +
                            std::to_string(p.cols()) + " classes");
    }
    const double v = -std::log(std::max(p(0, label), clamp));
    return OpRecorder::record(t, OpKind::NegLogPick, Matrix(1, 1, v), {probs.id()}, clamp, label);
}

Matrix finite_difference_grad(const std::function<double(const Matrix&)>& f, const Matrix& at, double eps) {
    if (!(eps > 0.0)) throw ContractError("finite_difference_grad: eps must be positive");
    Matrix x = at;
    Matrix out(at.rows(), at.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data()[i];
        x.data()[i] = orig + eps;
        const double fp = f(x);
        x.data()[i] = orig - eps;
        const double fm = f(x);
        x.data()[i] = orig;
        out.data()[i] = (fp - fm) / (2.0 * eps);
    }
    return out;
}

}  // namespace dagcn::autodiff
