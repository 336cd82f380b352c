#include "dagcn/model.hpp"

#include <cmath>

#include "dagcn/rng.hpp"

namespace dagcn {

namespace ad = autodiff;

std::string_view to_string(Nonlinearity v) noexcept { return v == Nonlinearity::Relu ? "relu" : "tanh"; }

std::string_view to_string(HopAttention v) noexcept { return v == HopAttention::Additive ? "additive" : "free"; }

Nonlinearity parse_nonlinearity(std::string_view s) {
    if (s == "relu") return Nonlinearity::Relu;
    if (s == "tanh") return Nonlinearity::Tanh;
    throw ConfigError("unknown nonlinearity '" + std::string(s) + "' (expected relu or tanh)");
}

HopAttention parse_hop_attention(std::string_view s) {
    if (s == "additive") return HopAttention::Additive;
    if (s == "free") return HopAttention::Free;
    throw ConfigError("unknown hop attention '" + std::string(s) + "' (expected additive or free)");
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw ConfigError(std::string("model.") + key + " must be >= 1");
    };
    positive(k, "k");
    positive(m, "m");
    positive(hidden, "hidden");
    positive(r, "r");
    positive(num_classes, "num_classes");
    positive(feature_dim, "feature_dim");
}

ModelParams zero_params(const ModelConfig& config) {
    config.validate();
    const std::size_t h = config.hidden;
    ModelParams p;
    p.input_proj = Matrix(config.feature_dim, h);
    p.layers.resize(config.m);
    for (auto& layer : p.layers) {
        layer.hop_weight = Matrix(h, h);
        if (config.hop_attention == HopAttention::Additive) {
            layer.att_weight = Matrix(h, h);
            layer.att_vector = Matrix(h, 1);
        } else {
            layer.hop_logits = Matrix(config.k, 1);
        }
    }
    p.combine_weight = Matrix((config.m + 1) * h, h);
    p.combine_bias = Matrix(1, h);
    p.pool_u1 = Matrix(h, h);
    p.pool_u2 = Matrix(config.r, h);
    p.classifier_weight = Matrix(config.r * h, config.num_classes);
    p.classifier_bias = Matrix(1, config.num_classes);
    return p;
}

bool is_bias(std::string_view name) noexcept { return name.ends_with(".bias"); }

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p = zero_params(config);
    Rng rng(seed);
    p.for_each([&](const std::string& name, Matrix& w) {
        if (is_bias(name)) return;
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (double& v : w.values()) v = uniform(rng, -bound, bound);
    });
    return p;
}

void check_param_shapes(const ModelParams& params, const ModelConfig& config) {
    std::vector<std::pair<std::string, std::string>> expected;
    zero_params(config).for_each([&](const std::string& name, const Matrix& m) { expected.emplace_back(name, m.shape()); });
    std::vector<std::pair<std::string, std::string>> actual;
    params.for_each([&](const std::string& name, const Matrix& m) { actual.emplace_back(name, m.shape()); });
    if (expected != actual) {
        std::string detail;
        for (std::size_t i = 0; i < std::max(expected.size(), actual.size()); ++i) {
            const auto e = i < expected.size() ? expected[i].first + expected[i].second : std::string("-");
            const auto a = i < actual.size() ? actual[i].first + actual[i].second : std::string("-");
            if (e != a) {
                detail = "expected " + e + ", found " + a;
                break;
            }
        }
        throw DimensionError("parameter shapes do not match the model config: " + detail);
    }
}

BoundParams bind_params(ad::Tape& tape, const ModelParams& params, bool requires_grad) {
    BoundParams b;
    auto bind = [&](const Matrix& m) { return is_present(m) ? tape.leaf(m, requires_grad) : ad::Tensor{}; };
    b.input_proj = bind(params.input_proj);
    b.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        b.layers[l].hop_weight = bind(params.layers[l].hop_weight);
        b.layers[l].att_weight = bind(params.layers[l].att_weight);
        b.layers[l].att_vector = bind(params.layers[l].att_vector);
        b.layers[l].hop_logits = bind(params.layers[l].hop_logits);
    }
    b.combine_weight = bind(params.combine_weight);
    b.combine_bias = bind(params.combine_bias);
    b.pool_u1 = bind(params.pool_u1);
    b.pool_u2 = bind(params.pool_u2);
    b.classifier_weight = bind(params.classifier_weight);
    b.classifier_bias = bind(params.classifier_bias);
    return b;
}

ModelParams collect_grads(const BoundParams& bound, const ModelParams& like) {
    std::vector<const ad::Tensor*> tensors;
    bound.for_each([&](const std::string&, const ad::Tensor& t) { tensors.push_back(&t); });
    ModelParams out = like;
    std::size_t i = 0;
    out.for_each([&](const std::string& name, Matrix& m) {
        if (i >= tensors.size()) throw DimensionError("collect_grads: missing bound tensor for " + name);
        const ad::Tensor& t = *tensors[i++];
        if (t.has_grad()) {
            m = t.grad();
        } else {
            m.fill(0.0);
        }
    });
    return out;
}

ad::Tensor apply_nonlinearity(const ad::Tensor& x, Nonlinearity f) {
    return f == Nonlinearity::Relu ? ad::relu(x) : ad::tanh(x);
}

ad::Tensor agc_layer(const ad::Tensor& a_norm, const ad::Tensor& h0, const BoundLayer& layer,
                     const ModelConfig& config, LayerTrace* trace) {
    if (h0.cols() != config.hidden) {
        throw DimensionError("agc_layer: input width " + std::to_string(h0.cols()) + " != hidden " +
                             std::to_string(config.hidden));
    }
    if (a_norm.rows() != h0.rows() || a_norm.cols() != h0.rows()) {
        throw DimensionError("agc_layer: adjacency " + a_norm.value().shape() + " does not match input " +
                             h0.value().shape());
    }
    ad::Tape& tape = *h0.tape();
    const std::size_t n = h0.rows();

    std::vector<ad::Tensor> hops;
    hops.reserve(config.k);
    ad::Tensor h = h0;
    for (std::size_t i = 0; i < config.k; ++i) {
        h = apply_nonlinearity(ad::matmul(ad::matmul(a_norm, h), layer.hop_weight), config.nonlinearity);
        hops.push_back(h);
    }

    ad::Tensor scores;
    if (config.hop_attention == HopAttention::Additive) {
        std::vector<ad::Tensor> cols;
        cols.reserve(config.k);
        for (const ad::Tensor& hi : hops) {
            cols.push_back(ad::matmul(ad::tanh(ad::matmul(hi, layer.att_weight)), layer.att_vector));
        }
        scores = ad::concat_cols(cols);
    } else {
        scores = ad::matmul(tape.constant(Matrix(n, 1, 1.0)), ad::transpose(layer.hop_logits));
    }
    const ad::Tensor alpha = ad::softmax_rows(scores);

    ad::Tensor gamma = ad::scale_rows(hops[0], ad::slice_col(alpha, 0));
    for (std::size_t i = 1; i < config.k; ++i) {
        gamma = ad::add(gamma, ad::scale_rows(hops[i], ad::slice_col(alpha, i)));
    }

    if (trace != nullptr) {
        trace->input = h0.value();
        trace->hops.clear();
        for (const ad::Tensor& hi : hops) trace->hops.push_back(hi.value());
        trace->alpha = alpha.value();
        trace->gamma = gamma.value();
    }
    return gamma;
}

ad::Tensor agc_module(const ad::Tensor& a_norm, const ad::Tensor& x, const BoundParams& params,
                      const ModelConfig& config, ForwardTrace* trace) {
    if (x.cols() != config.feature_dim) {
        throw DimensionError("agc_module: feature width " + std::to_string(x.cols()) + " != feature_dim " +
                             std::to_string(config.feature_dim));
    }
    if (params.layers.size() != config.m) {
        throw DimensionError("agc_module: " + std::to_string(params.layers.size()) + " layer parameter sets for m=" +
                             std::to_string(config.m));
    }
    const ad::Tensor x_proj = ad::matmul(x, params.input_proj);
    if (trace != nullptr) {
        trace->x_proj = x_proj.value();
        trace->layers.assign(config.m, {});
    }

    std::vector<ad::Tensor> reps{x_proj};
    reps.reserve(config.m + 1);
    // First layer sees the projected features; later layers see the previous
    // output plus the projected features (residual).
    ad::Tensor input = x_proj;
    for (std::size_t l = 0; l < config.m; ++l) {
        const ad::Tensor gamma =
            agc_layer(a_norm, input, params.layers[l], config, trace ? &trace->layers[l] : nullptr);
        reps.push_back(gamma);
        input = ad::add(gamma, x_proj);
    }
    const ad::Tensor combined =
        ad::add_row_broadcast(ad::matmul(ad::concat_cols(reps), params.combine_weight), params.combine_bias);
    ad::Tensor g = apply_nonlinearity(combined, config.nonlinearity);
    if (trace != nullptr) trace->node_repr = g.value();
    return g;
}

PoolResult self_attention_pool(const ad::Tensor& node_repr, const BoundParams& params, ForwardTrace* trace) {
    if (node_repr.rows() == 0) throw ContractError("self_attention_pool: empty node representation");
    const ad::Tensor hidden = ad::tanh(ad::matmul(params.pool_u1, ad::transpose(node_repr)));  // h x n
    const ad::Tensor logits = ad::matmul(params.pool_u2, hidden);                               // r x n
    const ad::Tensor weights = ad::softmax_rows(logits);
    const ad::Tensor embedding = ad::matmul(weights, node_repr);                                // r x h
    if (trace != nullptr) {
        trace->pool_logits = logits.value();
        trace->pool_weights = weights.value();
        trace->embedding = embedding.value();
    }
    return {weights, embedding};
}

ad::Tensor classify(const ad::Tensor& embedding, const BoundParams& params, ForwardTrace* trace) {
    const ad::Tensor logits =
        ad::add_row_broadcast(ad::matmul(ad::flatten(embedding), params.classifier_weight), params.classifier_bias);
    const ad::Tensor probs = ad::softmax_rows(logits);
    if (trace != nullptr) {
        trace->logits = logits.value();
        trace->probs = probs.value();
    }
    return probs;
}

ad::Tensor model_forward(ad::Tape& tape, const Graph& graph, const BoundParams& params, const ModelConfig& config,
                         ForwardTrace* trace, const Matrix* a_norm) {
    if (graph.features.cols() != config.feature_dim) {
        throw DimensionError("model_forward: graph feature width " + std::to_string(graph.features.cols()) +
                             " != feature_dim " + std::to_string(config.feature_dim));
    }
    if (graph.features.rows() != graph.num_nodes()) {
        throw DimensionError("model_forward: feature rows do not match node count");
    }
    const ad::Tensor a = a_norm ? tape.constant(*a_norm) : tape.constant(normalize_adjacency(graph.adjacency_matrix()));
    if (trace != nullptr) trace->a_norm = a.value();
    const ad::Tensor x = tape.constant(graph.features);
    const ad::Tensor g = agc_module(a, x, params, config, trace);
    const PoolResult pooled = self_attention_pool(g, params, trace);
    return classify(pooled.embedding, params, trace);
}

Matrix predict(const Graph& graph, const ModelParams& params, const ModelConfig& config, ForwardTrace* trace,
               const Matrix* a_norm) {
    ad::Tape tape;
    const BoundParams bound = bind_params(tape, params, false);
    return model_forward(tape, graph, bound, config, trace, a_norm).value();
}

std::size_t argmax_row(const Matrix& row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.cols(); ++c) {
        if (row(0, c) > row(0, best)) best = c;
    }
    return best;
}

}  // namespace dagcn
