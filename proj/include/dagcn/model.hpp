#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dagcn/autodiff.hpp"
#include "dagcn/graph_io.hpp"
#include "dagcn/matrix.hpp"

namespace dagcn {

enum class Nonlinearity { Relu, Tanh };

/// How each AGC layer scores its k hop outputs.
///  Additive: per node, score_i(v) = tanh(H^i_v W_a) w_a, softmax over hops.
///  Free:     k learned logits shared by every node.
enum class HopAttention { Additive, Free };

std::string_view to_string(Nonlinearity v) noexcept;
std::string_view to_string(HopAttention v) noexcept;
Nonlinearity parse_nonlinearity(std::string_view s);
HopAttention parse_hop_attention(std::string_view s);

struct ModelConfig {
    std::size_t k = 3;            // hops per AGC layer
    std::size_t m = 3;            // AGC layers
    std::size_t hidden = 64;
    std::size_t r = 8;            // pooling subspaces
    std::size_t num_classes = 2;
    std::size_t feature_dim = 1;
    Nonlinearity nonlinearity = Nonlinearity::Relu;
    HopAttention hop_attention = HopAttention::Additive;

    /// Throws ConfigError on a zero k, m, r, hidden, class count or feature width.
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct LayerParamsT {
    T hop_weight;    // h x h, shared by the k propagation steps
    T att_weight;    // h x h (additive scoring)
    T att_vector;    // h x 1 (additive scoring)
    T hop_logits;    // k x 1 (free scoring)
};

inline bool is_present(const Matrix& m) noexcept { return !m.empty(); }
inline bool is_present(const autodiff::Tensor& t) noexcept { return t.valid(); }

/// Every trainable quantity of the model. Instantiated with Matrix for stored
/// parameters and with autodiff::Tensor for parameters bound to a tape.
template <class T>
struct ParamPack {
    T input_proj;                        // c x h
    std::vector<LayerParamsT<T>> layers; // m entries
    T combine_weight;                    // (m+1)h x h
    T combine_bias;                      // 1 x h
    T pool_u1;                           // h x h
    T pool_u2;                           // r x h
    T classifier_weight;                 // rh x L
    T classifier_bias;                   // 1 x L

    /// Visits (name, entry) for every present entry in a fixed order.
    template <class F>
    void for_each(F&& f) {
        visit_all(*this, f);
    }
    template <class F>
    void for_each(F&& f) const {
        visit_all(*this, f);
    }

private:
    template <class Self, class F>
    static void visit_all(Self& self, F& f) {
        auto visit = [&f](const std::string& name, auto& entry) {
            if (is_present(entry)) f(name, entry);
        };
        visit("input_proj", self.input_proj);
        for (std::size_t l = 0; l < self.layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l + 1) + ".";
            visit(p + "hop_weight", self.layers[l].hop_weight);
            visit(p + "att_weight", self.layers[l].att_weight);
            visit(p + "att_vector", self.layers[l].att_vector);
            visit(p + "hop_logits", self.layers[l].hop_logits);
        }
        visit("combine.weight", self.combine_weight);
        visit("combine.bias", self.combine_bias);
        visit("pool.u1", self.pool_u1);
        visit("pool.u2", self.pool_u2);
        visit("classifier.weight", self.classifier_weight);
        visit("classifier.bias", self.classifier_bias);
    }
};

using ModelParams = ParamPack<Matrix>;
using BoundParams = ParamPack<autodiff::Tensor>;
using BoundLayer = LayerParamsT<autodiff::Tensor>;

/// Zero-filled parameters with the declared shapes for `config`.
ModelParams zero_params(const ModelConfig& config);

/// Uniform in +-sqrt(6 / (rows + cols)) per weight matrix; biases zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws DimensionError if any entry's shape differs from the declaration.
void check_param_shapes(const ModelParams& params, const ModelConfig& config);

/// True if `name` is a bias (zero-initialized, not fan-bounded).
bool is_bias(std::string_view name) noexcept;

BoundParams bind_params(autodiff::Tape& tape, const ModelParams& params, bool requires_grad = true);

/// Gradients of a bound parameter set after backward(); entries the loss did
/// not reach are zero.
ModelParams collect_grads(const BoundParams& bound, const ModelParams& like);

/// Intermediates of one AGC layer.
struct LayerTrace {
    Matrix input;              // H^0 fed to the layer
    std::vector<Matrix> hops;  // H^1..H^k
    Matrix alpha;              // n x k hop weights, rows sum to 1
    Matrix gamma;              // n x h
};

/// Every intermediate of one forward pass.
struct ForwardTrace {
    Matrix a_norm;
    Matrix x_proj;
    std::vector<LayerTrace> layers;
    Matrix node_repr;     // G, n x h
    Matrix pool_logits;   // S, r x n
    Matrix pool_weights;  // B, r x n
    Matrix embedding;     // M, r x h
    Matrix logits;        // 1 x L
    Matrix probs;         // 1 x L
};

autodiff::Tensor apply_nonlinearity(const autodiff::Tensor& x, Nonlinearity f);

/// k propagation steps H^i = f(A_norm H^{i-1} W) and attention over the hop outputs.
autodiff::Tensor agc_layer(const autodiff::Tensor& a_norm, const autodiff::Tensor& h0, const BoundLayer& layer,
                           const ModelConfig& config, LayerTrace* trace = nullptr);

/// Residual stack of m AGC layers followed by the dense combination; returns G (n x h).
autodiff::Tensor agc_module(const autodiff::Tensor& a_norm, const autodiff::Tensor& x, const BoundParams& params,
                            const ModelConfig& config, ForwardTrace* trace = nullptr);

struct PoolResult {
    autodiff::Tensor weights;    // B, r x n
    autodiff::Tensor embedding;  // M, r x h
};

/// B = softmax_rows(u2 tanh(u1 G^T)), M = B G.
PoolResult self_attention_pool(const autodiff::Tensor& node_repr, const BoundParams& params,
                               ForwardTrace* trace = nullptr);

/// softmax(flatten(M) Z + C) as 1 x L.
autodiff::Tensor classify(const autodiff::Tensor& embedding, const BoundParams& params, ForwardTrace* trace = nullptr);

/// Full forward pass for one graph on `tape`. `a_norm` may supply a
/// precomputed normalized adjacency for the graph.
autodiff::Tensor model_forward(autodiff::Tape& tape, const Graph& graph, const BoundParams& params,
                               const ModelConfig& config, ForwardTrace* trace = nullptr,
                               const Matrix* a_norm = nullptr);

/// Gradient-free convenience: class probabilities (1 x L) for one graph.
Matrix predict(const Graph& graph, const ModelParams& params, const ModelConfig& config,
               ForwardTrace* trace = nullptr, const Matrix* a_norm = nullptr);

/// Index of the largest probability; ties go to the lower index.
std::size_t argmax_row(const Matrix& row);

}  // namespace dagcn
