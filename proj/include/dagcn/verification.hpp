#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dagcn/graph_io.hpp"
#include "dagcn/model.hpp"

// Oracles that check the engine against sources sharing none of its code:
// a straight-line scalar re-derivation of the forward pass, central finite
// differences of the loss, and node-relabeling invariance.
namespace dagcn::verification {

using Grid = std::vector<std::vector<double>>;

struct ReferenceLayer {
    Grid input;
    std::vector<Grid> hops;
    Grid alpha;
    Grid gamma;
};

/// Every intermediate of one forward pass, computed with plain loops.
struct ReferenceTranscript {
    Grid a_norm;
    Grid x_proj;
    std::vector<ReferenceLayer> layers;
    Grid node_repr;
    Grid pool_logits;
    Grid pool_weights;
    Grid embedding;
    std::vector<double> logits;
    std::vector<double> probs;
};

/// Hand-checkable scale only: at most 5 nodes and hidden width 4.
ReferenceTranscript reference_forward(const Graph& graph, const ModelParams& params, const ModelConfig& config);

struct Deviation {
    std::string quantity;
    double max_abs = 0.0;
};

struct TranscriptComparison {
    std::vector<Deviation> deviations;
    double worst = 0.0;
    bool passed(double tol) const { return worst <= tol; }
};

/// Entry-wise comparison of an engine trace against the reference transcript.
TranscriptComparison compare_transcript(const ReferenceTranscript& ref, const ForwardTrace& trace);

/// The fixed 3-node path instance with hand-set small-integer parameters.
struct TranscriptInstance {
    Graph graph;
    ModelConfig config;
    ModelParams params;
};
TranscriptInstance fixed_transcript_instance();

struct GradcheckEntry {
    std::string name;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
};

struct GradcheckReport {
    std::uint64_t seed = 0;
    std::vector<GradcheckEntry> entries;
    double worst = 0.0;
    bool passed(double tol) const { return worst <= tol; }
};

/// |a - b| / max(|a|, |b|), zero when both are exactly zero.
double relative_error(double analytic, double numeric);

/// Random graph of `n_nodes` nodes, random features and label, parameters from
/// init_params(config, seed); compares backward() with central differences of
/// the cross-entropy loss for every parameter entry.
GradcheckReport gradcheck_model(const ModelConfig& config, std::uint64_t seed, std::size_t n_nodes = 6,
                                double eps = 1e-5);

/// The small configuration used by the gradient oracle: h=8, k=3, m=2, r=4.
ModelConfig gradcheck_config();

/// Random connected-or-not graph with features in [-1, 1] and a random label.
Graph random_graph(std::size_t n_nodes, std::size_t feature_dim, std::size_t num_classes, double edge_prob,
                   std::uint64_t seed);

/// Random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

struct PermutationReport {
    std::size_t trials = 0;
    double worst = 0.0;
    bool passed(double tol) const { return worst <= tol; }
};

/// Max |probs(g) - probs(permute(g))| over `trials` random graphs/permutations.
PermutationReport permutation_suite(std::size_t trials, std::uint64_t seed);
PermutationReport permutation_suite(std::size_t trials, std::uint64_t seed, const ModelConfig& config);

}  // namespace dagcn::verification
