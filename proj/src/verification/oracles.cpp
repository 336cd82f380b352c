#include <algorithm>
#include <cmath>
#include <numeric>

#include "dagcn/rng.hpp"
#include "dagcn/training.hpp"
#include "dagcn/verification.hpp"

namespace dagcn::verification {

namespace {

double grid_dev(const Grid& ref, const Matrix& m) {
    if (ref.size() != m.rows() || (!ref.empty() && ref[0].size() != m.cols())) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) worst = std::max(worst, std::abs(ref[i][j] - m(i, j)));
    }
    return worst;
}

double row_dev(const std::vector<double>& ref, const Matrix& m) {
    if (m.rows() != 1 || ref.size() != m.cols()) return INFINITY;
    double worst = 0.0;
    for (std::size_t j = 0; j < ref.size(); ++j) worst = std::max(worst, std::abs(ref[j] - m(0, j)));
    return worst;
}

double loss_at(const Graph& g, const ModelParams& params, const ModelConfig& config, const Matrix& a_norm) {
    const Matrix probs = predict(g, params, config, nullptr, &a_norm);
    return -std::log(std::max(probs(0, g.label), 1e-12));
}

}  // namespace

TranscriptComparison compare_transcript(const ReferenceTranscript& ref, const ForwardTrace& trace) {
    TranscriptComparison out;
    auto add = [&](std::string name, double dev) {
        out.worst = std::max(out.worst, dev);
        out.deviations.push_back({std::move(name), dev});
    };
    add("a_norm", grid_dev(ref.a_norm, trace.a_norm));
    add("x_proj", grid_dev(ref.x_proj, trace.x_proj));
    if (ref.layers.size() != trace.layers.size()) add("layer_count", INFINITY);
    for (std::size_t l = 0; l < std::min(ref.layers.size(), trace.layers.size()); ++l) {
        const std::string p = "layer" + std::to_string(l + 1) + ".";
        const ReferenceLayer& rl = ref.layers[l];
        const LayerTrace& tl = trace.layers[l];
        add(p + "input", grid_dev(rl.input, tl.input));
        if (rl.hops.size() != tl.hops.size()) add(p + "hop_count", INFINITY);
        for (std::size_t i = 0; i < std::min(rl.hops.size(), tl.hops.size()); ++i) {
            add(p + "H" + std::to_string(i + 1), grid_dev(rl.hops[i], tl.hops[i]));
        }
        add(p + "alpha", grid_dev(rl.alpha, tl.alpha));
        add(p + "gamma", grid_dev(rl.gamma, tl.gamma));
    }
    add("G", grid_dev(ref.node_repr, trace.node_repr));
    add("S", grid_dev(ref.pool_logits, trace.pool_logits));
    add("B", grid_dev(ref.pool_weights, trace.pool_weights));
    add("M", grid_dev(ref.embedding, trace.embedding));
    add("logits", row_dev(ref.logits, trace.logits));
    add("probs", row_dev(ref.probs, trace.probs));
    return out;
}

double relative_error(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale == 0.0) return 0.0;
    return std::abs(analytic - numeric) / scale;
}

ModelConfig gradcheck_config() {
    ModelConfig c;
    c.hidden = 8;
    c.k = 3;
    c.m = 2;
    c.r = 4;
    c.num_classes = 3;
    c.feature_dim = 5;
    return c;
}

Graph random_graph(std::size_t n_nodes, std::size_t feature_dim, std::size_t num_classes, double edge_prob,
                   std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t u = 0; u < n_nodes; ++u) {
        for (std::size_t v = u + 1; v < n_nodes; ++v) {
            if (uniform01(rng) < edge_prob) edges.emplace_back(u, v);
        }
    }
    Graph g = graph_from_edges(n_nodes, edges);
    g.features = Matrix(n_nodes, feature_dim);
    for (double& v : g.features.values()) v = uniform(rng, -1.0, 1.0);
    g.label = static_cast<std::size_t>(uniform_index(rng, num_classes));
    return g;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    Rng rng(seed);
    shuffle(std::span(p), rng);
    return p;
}

GradcheckReport gradcheck_model(const ModelConfig& config, std::uint64_t seed, std::size_t n_nodes, double eps) {
    GradcheckReport report;
    report.seed = seed;
    const Graph g = random_graph(n_nodes, config.feature_dim, config.num_classes, 0.4, mix_seed(seed, 1));
    const Matrix a_norm = normalize_adjacency(g.adjacency_matrix());
    ModelParams params = init_params(config, seed);
    // Nonzero biases so their gradients are exercised away from the init point.
    Rng rng(mix_seed(seed, 2));
    params.for_each([&](const std::string& name, Matrix& m) {
        if (is_bias(name)) {
            for (double& v : m.values()) v = uniform(rng, -0.5, 0.5);
        }
    });

    const GraphSample analytic = graph_gradient(g, params, config, &a_norm);

    std::vector<const Matrix*> grads;
    analytic.grads.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });

    std::size_t idx = 0;
    params.for_each([&](const std::string& name, Matrix& w) {
        const Matrix& ga = *grads[idx++];
        GradcheckEntry entry{name, w.size(), 0.0};
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w.data()[i];
            w.data()[i] = orig + eps;
            const double fp = loss_at(g, params, config, a_norm);
            w.data()[i] = orig - eps;
            const double fm = loss_at(g, params, config, a_norm);
            w.data()[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            entry.max_rel_error = std::max(entry.max_rel_error, relative_error(ga.data()[i], numeric));
        }
        report.worst = std::max(report.worst, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    });
    return report;
}

PermutationReport permutation_suite(std::size_t trials, std::uint64_t seed) {
    return permutation_suite(trials, seed, gradcheck_config());
}

PermutationReport permutation_suite(std::size_t trials, std::uint64_t seed, const ModelConfig& config) {
    if (trials == 0) throw ContractError("permutation_suite: trials must be >= 1");
    PermutationReport report;
    report.trials = trials;
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(uniform_index(rng, 12));
        const double p = uniform(rng, 0.1, 0.7);
        const Graph g = random_graph(n, config.feature_dim, config.num_classes, p, rng());
        const ModelParams params = init_params(config, rng());
        const auto perm = random_permutation(n, rng());
        const Matrix base = predict(g, params, config);
        const Matrix moved = predict(permute_graph(g, perm), params, config);
        report.worst = std::max(report.worst, max_abs_diff(base, moved));
    }
    return report;
}

}  // namespace dagcn::verification
