#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dagcn/autodiff.hpp"
#include "dagcn/graph_io.hpp"
#include "dagcn/model.hpp"
#include "dagcn/rng.hpp"

namespace dagcn {

struct TrainConfig {
    double learning_rate = 0.001;
    double l2 = 1e-4;
    std::size_t batch_size = 50;
    std::size_t epochs = 200;
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    /// When non-empty, each fold picks its learning rate from this grid using
    /// an inner split of its own training graphs.
    std::vector<double> lr_grid;
    /// Epochs per grid candidate; 0 means `epochs`.
    std::size_t grid_epochs = 0;
    ModelConfig model;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t optimizer_steps = 0;
};

struct FoldReport {
    std::size_t fold = 0;
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    double test_accuracy = 0.0;
    std::vector<EpochStats> trace;
    std::vector<std::size_t> test_indices;
    ModelParams params;
};

struct CVReport {
    std::string dataset;
    TrainConfig config;
    std::vector<FoldReport> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;   // population std over folds
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// -log(max(p_label, 1e-12)); recorded on the probabilities' tape.
autodiff::Tensor cross_entropy_loss(const autodiff::Tensor& probs, std::size_t label);

struct AdamState {
    std::vector<Matrix> first;
    std::vector<Matrix> second;
    std::uint64_t step = 0;

    static AdamState for_params(const ModelParams& params);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update. L2 enters as g + l2 * w before the moments.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double l2,
               const AdamHyper& hyper = {});

/// Normalized adjacency per graph, computed once. Graphs whose dense operator
/// would exceed the entry budget are left out and normalized on demand.
class AdjacencyCache {
public:
    AdjacencyCache() = default;
    explicit AdjacencyCache(const Dataset& dataset, std::size_t max_total_entries = 64u << 20);
    const Matrix* get(std::size_t graph_index) const;

private:
    std::vector<Matrix> cache_;
};

struct TrainHooks {
    /// Called with the dataset index of every graph used for a gradient step.
    std::function<void(std::size_t)> on_train_graph;
};

struct GraphSample {
    double loss = 0.0;
    bool correct = false;
    ModelParams grads;
};

/// Forward + backward for a single graph.
GraphSample graph_gradient(const Graph& graph, const ModelParams& params, const ModelConfig& config,
                           const Matrix* a_norm = nullptr);

/// One shuffled pass over `train` in mini-batches; one Adam step per batch on
/// the mean of the per-graph gradients (accumulated in batch order).
EpochStats train_epoch(ModelParams& params, AdamState& state, const Dataset& dataset,
                       std::span<const std::size_t> train, const TrainConfig& config, double learning_rate, Rng& rng,
                       const AdjacencyCache* cache = nullptr, const TrainHooks* hooks = nullptr);

/// Fraction of graphs whose argmax class equals the label.
double evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                std::span<const std::size_t> indices, const AdjacencyCache* cache = nullptr);

struct CvOptions {
    std::size_t jobs = 1;
    TrainHooks hooks;
    std::function<void(const FoldReport&)> on_fold_done;
};

/// Model config with dataset-derived fields (feature_dim, num_classes) filled in.
ModelConfig resolve_model_config(const ModelConfig& base, const Dataset& dataset);

/// Stratified k-fold cross-validation. Fold f trains a fresh model seeded with
/// seed + f. Fold order in the report is by fold index regardless of `jobs`.
CVReport run_cv(const Dataset& dataset, const TrainConfig& config, const CvOptions& options = {});

}  // namespace dagcn
