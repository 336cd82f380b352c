#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dagcn/matrix.hpp"

namespace dagcn {

/// One labelled sample. The adjacency is kept as sorted neighbour lists
/// (symmetric, no self loops); adjacency_matrix() materializes the dense
/// binary form when a computation needs it.
struct Graph {
    std::vector<std::vector<std::uint32_t>> neighbors;
    Matrix features;                 // n x feature_dim
    std::vector<long> node_labels;   // raw TU node labels, empty if the dataset has none
    std::size_t label = 0;           // contiguous class index

    std::size_t num_nodes() const noexcept { return neighbors.size(); }
    std::size_t num_edges() const noexcept;
    Matrix adjacency_matrix() const;
};

enum class FeatureScheme { Auto, OneHot, Degree };

struct LoadOptions {
    FeatureScheme scheme = FeatureScheme::Auto;
    std::size_t degree_cap = 25;
};

struct Dataset {
    std::string name;
    std::vector<Graph> graphs;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    std::map<long, std::size_t> label_map;   // original graph label -> class index
    std::vector<long> node_label_alphabet;   // sorted distinct node labels
    FeatureScheme scheme = FeatureScheme::Auto;

    std::vector<std::size_t> labels() const;
};

/// Reads name_A.txt, name_graph_indicator.txt, name_graph_labels.txt and the
/// optional name_node_labels.txt from `directory`.
Dataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name,
                        const LoadOptions& options = {});

/// Writes the four TU files for `dataset` (node labels only when every graph
/// carries them). Graph labels are written as their original values.
void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& directory);

/// Builds a Dataset from in-memory graphs: remaps labels, builds features.
Dataset make_dataset(std::string name, std::vector<Graph> graphs, std::span<const long> raw_graph_labels,
                     const LoadOptions& options = {});

/// (A + I) D^-1 with D the degree matrix of A + I. Column-stochastic.
Matrix normalize_adjacency(const Matrix& adjacency);

/// One-hot rows over `alphabet` (OneHot) or over degree buckets 0..degree_cap,
/// the last bucket collecting every degree >= degree_cap (Degree).
Matrix build_features(std::span<const long> node_labels, std::span<const std::vector<std::uint32_t>> neighbors,
                      FeatureScheme scheme, std::span<const long> alphabet, std::size_t degree_cap = 25);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified k-fold partition of indices 0..labels.size(). Per class the
/// fold sizes differ by at most one; identical seeds give identical splits.
std::vector<Split> stratified_kfold(std::span<const std::size_t> labels, std::size_t folds, std::uint64_t seed);
std::vector<Split> stratified_kfold(const Dataset& dataset, std::size_t folds, std::uint64_t seed);

struct DatasetStats {
    std::size_t graphs = 0;
    std::size_t max_nodes = 0;
    double mean_nodes = 0.0;
    std::size_t feature_dim = 0;
    std::vector<std::size_t> class_histogram;
};

DatasetStats compute_stats(const Dataset& dataset);

/// Relabels nodes: node v of `g` becomes node perm[v] of the result.
Graph permute_graph(const Graph& g, std::span<const std::size_t> perm);

/// Graph from an undirected edge list over n nodes (duplicates and self loops dropped).
Graph graph_from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);

}  // namespace dagcn
