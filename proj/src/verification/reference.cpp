// Straight-line scalar re-derivation of the forward pass. Deliberately shares
// no arithmetic with the tensor engine: plain nested vectors and loops only.
#include <cmath>

#include "dagcn/verification.hpp"

namespace dagcn::verification {

namespace {

Grid to_grid(const Matrix& m) {
    Grid g(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
    }
    return g;
}

Grid zeros(std::size_t r, std::size_t c) { return Grid(r, std::vector<double>(c, 0.0)); }

double phi(double x, Nonlinearity f) {
    if (f == Nonlinearity::Relu) return x > 0.0 ? x : 0.0;
    return std::tanh(x);
}

void softmax_in_place(std::vector<double>& row) {
    double mx = row[0];
    for (double v : row) mx = v > mx ? v : mx;
    double total = 0.0;
    for (double& v : row) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : row) v /= total;
}

}  // namespace

ReferenceTranscript reference_forward(const Graph& graph, const ModelParams& params, const ModelConfig& config) {
    const std::size_t n = graph.num_nodes();
    const std::size_t h = config.hidden;
    const std::size_t c = config.feature_dim;
    const std::size_t k = config.k;
    const std::size_t r = config.r;
    const std::size_t classes = config.num_classes;
    if (n > 5 || h > 4) throw ContractError("reference_forward: limited to n <= 5 and hidden <= 4");
    check_param_shapes(params, config);

    ReferenceTranscript t;

    // adjacency with self loops, each column divided by its degree
    Grid adj = zeros(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::uint32_t v : graph.neighbors[u]) adj[u][v] = 1.0;
        adj[u][u] = 1.0;
    }
    t.a_norm = zeros(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double deg = 0.0;
        for (std::size_t i = 0; i < n; ++i) deg += adj[i][j];
        for (std::size_t i = 0; i < n; ++i) t.a_norm[i][j] = adj[i][j] / deg;
    }

    const Grid X = to_grid(graph.features);
    const Grid P = to_grid(params.input_proj);
    t.x_proj = zeros(n, h);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < h; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < c; ++q) s += X[v][q] * P[q][j];
            t.x_proj[v][j] = s;
        }
    }

    std::vector<Grid> reps{t.x_proj};
    Grid input = t.x_proj;
    for (std::size_t l = 0; l < config.m; ++l) {
        const Grid W = to_grid(params.layers[l].hop_weight);
        ReferenceLayer layer;
        layer.input = input;

        Grid prev = input;
        for (std::size_t i = 0; i < k; ++i) {
            Grid agg = zeros(n, h);
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t j = 0; j < h; ++j) {
                    double s = 0.0;
                    for (std::size_t u = 0; u < n; ++u) s += t.a_norm[v][u] * prev[u][j];
                    agg[v][j] = s;
                }
            }
            Grid next = zeros(n, h);
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t j = 0; j < h; ++j) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < h; ++q) s += agg[v][q] * W[q][j];
                    next[v][j] = phi(s, config.nonlinearity);
                }
            }
            layer.hops.push_back(next);
            prev = next;
        }

        layer.alpha = zeros(n, k);
        if (config.hop_attention == HopAttention::Additive) {
            const Grid Wa = to_grid(params.layers[l].att_weight);
            const Grid wa = to_grid(params.layers[l].att_vector);
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t i = 0; i < k; ++i) {
                    double score = 0.0;
                    for (std::size_t j = 0; j < h; ++j) {
                        double pre = 0.0;
                        for (std::size_t q = 0; q < h; ++q) pre += layer.hops[i][v][q] * Wa[q][j];
                        score += std::tanh(pre) * wa[j][0];
                    }
                    layer.alpha[v][i] = score;
                }
            }
        } else {
            const Grid a = to_grid(params.layers[l].hop_logits);
            for (std::size_t v = 0; v < n; ++v) {
                for (std::size_t i = 0; i < k; ++i) layer.alpha[v][i] = a[i][0];
            }
        }
        for (auto& row : layer.alpha) softmax_in_place(row);

        layer.gamma = zeros(n, h);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t j = 0; j < h; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < k; ++i) s += layer.alpha[v][i] * layer.hops[i][v][j];
                layer.gamma[v][j] = s;
            }
        }
        reps.push_back(layer.gamma);
        input = zeros(n, h);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t j = 0; j < h; ++j) input[v][j] = layer.gamma[v][j] + t.x_proj[v][j];
        }
        t.layers.push_back(std::move(layer));
    }

    const Grid D = to_grid(params.combine_weight);
    const Grid Db = to_grid(params.combine_bias);
    t.node_repr = zeros(n, h);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < h; ++j) {
            double s = Db[0][j];
            for (std::size_t blk = 0; blk < reps.size(); ++blk) {
                for (std::size_t q = 0; q < h; ++q) s += reps[blk][v][q] * D[blk * h + q][j];
            }
            t.node_repr[v][j] = phi(s, config.nonlinearity);
        }
    }

    const Grid U1 = to_grid(params.pool_u1);
    const Grid U2 = to_grid(params.pool_u2);
    Grid hidden = zeros(h, n);
    for (std::size_t a = 0; a < h; ++a) {
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t b = 0; b < h; ++b) s += U1[a][b] * t.node_repr[v][b];
            hidden[a][v] = std::tanh(s);
        }
    }
    t.pool_logits = zeros(r, n);
    for (std::size_t q = 0; q < r; ++q) {
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t a = 0; a < h; ++a) s += U2[q][a] * hidden[a][v];
            t.pool_logits[q][v] = s;
        }
    }
    t.pool_weights = t.pool_logits;
    for (auto& row : t.pool_weights) softmax_in_place(row);

    t.embedding = zeros(r, h);
    for (std::size_t q = 0; q < r; ++q) {
        for (std::size_t j = 0; j < h; ++j) {
            double s = 0.0;
            for (std::size_t v = 0; v < n; ++v) s += t.pool_weights[q][v] * t.node_repr[v][j];
            t.embedding[q][j] = s;
        }
    }

    const Grid Z = to_grid(params.classifier_weight);
    const Grid C = to_grid(params.classifier_bias);
    t.logits.assign(classes, 0.0);
    for (std::size_t cls = 0; cls < classes; ++cls) {
        double s = C[0][cls];
        for (std::size_t q = 0; q < r; ++q) {
            for (std::size_t j = 0; j < h; ++j) s += t.embedding[q][j] * Z[q * h + j][cls];
        }
        t.logits[cls] = s;
    }
    t.probs = t.logits;
    softmax_in_place(t.probs);
    return t;
}

TranscriptInstance fixed_transcript_instance() {
    TranscriptInstance inst;
    const std::pair<std::size_t, std::size_t> edges[] = {{0, 1}, {1, 2}};
    inst.graph = graph_from_edges(3, edges);
    inst.graph.features = Matrix::from_rows({{1, 0}, {0, 1}, {1, 0}});
    inst.graph.label = 1;

    ModelConfig& cfg = inst.config;
    cfg.k = 2;
    cfg.m = 2;
    cfg.hidden = 2;
    cfg.r = 2;
    cfg.num_classes = 2;
    cfg.feature_dim = 2;
    cfg.nonlinearity = Nonlinearity::Relu;
    cfg.hop_attention = HopAttention::Additive;

    ModelParams& p = inst.params;
    p = zero_params(cfg);
    p.input_proj = Matrix::from_rows({{1, 0}, {1, 1}});
    p.layers[0].hop_weight = Matrix::from_rows({{1, -1}, {0, 1}});
    p.layers[0].att_weight = Matrix::from_rows({{1, 0}, {0, -1}});
    p.layers[0].att_vector = Matrix::from_rows({{1}, {2}});
    p.layers[1].hop_weight = Matrix::from_rows({{0, 1}, {1, 0}});
    p.layers[1].att_weight = Matrix::from_rows({{1, 1}, {0, 1}});
    p.layers[1].att_vector = Matrix::from_rows({{-1}, {1}});
    p.combine_weight = Matrix::from_rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}, {-1, 1}, {1, -1}});
    p.combine_bias = Matrix::from_rows({{1, 0}});
    p.pool_u1 = Matrix::from_rows({{1, -1}, {1, 1}});
    p.pool_u2 = Matrix::from_rows({{1, 0}, {0, -1}});
    p.classifier_weight = Matrix::from_rows({{1, 0}, {0, 1}, {-1, 1}, {1, -1}});
    p.classifier_bias = Matrix::from_rows({{0, 1}});
    return inst;
}

}  // namespace dagcn::verification
