#include "dagcn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "dagcn/kernels.hpp"

namespace dagcn {

namespace ad = autodiff;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (l2 < 0.0) throw ConfigError("train.l2 must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (folds < 2) throw ConfigError("train.folds must be >= 2");
    for (double lr : lr_grid) {
        if (!(lr > 0.0)) throw ConfigError("train.lr_grid entries must be > 0");
    }
    model.validate();
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double total = 0.0;
    for (double v : values) total += v;
    const double mean = total / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

ad::Tensor cross_entropy_loss(const ad::Tensor& probs, std::size_t label) {
    return ad::neg_log_pick(probs, label, 1e-12);
}

AdamState AdamState::for_params(const ModelParams& params) {
    AdamState s;
    params.for_each([&](const std::string&, const Matrix& m) {
        s.first.emplace_back(m.rows(), m.cols());
        s.second.emplace_back(m.rows(), m.cols());
    });
    return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double l2,
               const AdamHyper& hyper) {
    std::vector<const Matrix*> g;
    grads.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    std::size_t idx = 0;
    params.for_each([&](const std::string& name, Matrix& w) {
        if (idx >= g.size() || idx >= state.first.size() || !g[idx]->same_shape(w) || !state.first[idx].same_shape(w)) {
            throw DimensionError("adam_step: gradient/state layout does not match parameter " + name);
        }
        const Matrix& gm = *g[idx];
        Matrix& m1 = state.first[idx];
        Matrix& m2 = state.second[idx];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = gm.data()[i] + l2 * w.data()[i];
            m1.data()[i] = hyper.beta1 * m1.data()[i] + (1.0 - hyper.beta1) * gi;
            m2.data()[i] = hyper.beta2 * m2.data()[i] + (1.0 - hyper.beta2) * gi * gi;
            const double mhat = m1.data()[i] / c1;
            const double vhat = m2.data()[i] / c2;
            w.data()[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
        }
        ++idx;
    });
}

AdjacencyCache::AdjacencyCache(const Dataset& dataset, std::size_t max_total_entries) {
    cache_.resize(dataset.graphs.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
        const std::size_t n = dataset.graphs[i].num_nodes();
        if (used + n * n > max_total_entries) continue;
        cache_[i] = normalize_adjacency(dataset.graphs[i].adjacency_matrix());
        used += n * n;
    }
}

const Matrix* AdjacencyCache::get(std::size_t graph_index) const {
    if (graph_index >= cache_.size() || cache_[graph_index].empty()) return nullptr;
    return &cache_[graph_index];
}

GraphSample graph_gradient(const Graph& graph, const ModelParams& params, const ModelConfig& config,
                           const Matrix* a_norm) {
    ad::Tape tape;
    const BoundParams bound = bind_params(tape, params, true);
    const ad::Tensor probs = model_forward(tape, graph, bound, config, nullptr, a_norm);
    const ad::Tensor loss = cross_entropy_loss(probs, graph.label);
    tape.backward(loss);
    GraphSample s;
    s.loss = loss.value()(0, 0);
    s.correct = argmax_row(probs.value()) == graph.label;
    s.grads = collect_grads(bound, params);
    return s;
}

namespace {

void accumulate(ModelParams& total, const ModelParams& part) {
    std::vector<const Matrix*> src;
    part.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
    std::size_t i = 0;
    total.for_each([&](const std::string&, Matrix& m) {
        kernels::active().axpy(m.size(), 1.0, src[i++]->data(), m.data());
    });
}

void scale_all(ModelParams& p, double factor) {
    p.for_each([&](const std::string&, Matrix& m) {
        for (double& v : m.values()) v *= factor;
    });
}

}  // namespace

EpochStats train_epoch(ModelParams& params, AdamState& state, const Dataset& dataset,
                       std::span<const std::size_t> train, const TrainConfig& config, double learning_rate, Rng& rng,
                       const AdjacencyCache* cache, const TrainHooks* hooks) {
    if (train.empty()) throw ContractError("train_epoch: empty training slice");
    std::vector<std::size_t> order(train.begin(), train.end());
    shuffle(std::span(order), rng);

    EpochStats stats;
    double loss_total = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        ModelParams batch_grad;
        for (std::size_t b = start; b < end; ++b) {
            const std::size_t gi = order[b];
            if (hooks != nullptr && hooks->on_train_graph) hooks->on_train_graph(gi);
            GraphSample s = graph_gradient(dataset.graphs[gi], params, config.model, cache ? cache->get(gi) : nullptr);
            loss_total += s.loss;
            correct += s.correct ? 1 : 0;
            if (b == start) {
                batch_grad = std::move(s.grads);
            } else {
                accumulate(batch_grad, s.grads);
            }
        }
        scale_all(batch_grad, 1.0 / static_cast<double>(end - start));
        adam_step(params, batch_grad, state, learning_rate, config.l2);
        ++stats.optimizer_steps;
    }
    stats.train_loss = loss_total / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    return stats;
}

double evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                std::span<const std::size_t> indices, const AdjacencyCache* cache) {
    if (indices.empty()) throw ContractError("evaluate: empty slice");
    std::size_t correct = 0;
    for (std::size_t gi : indices) {
        const Graph& g = dataset.graphs[gi];
        const Matrix probs = predict(g, params, config, nullptr, cache ? cache->get(gi) : nullptr);
        if (argmax_row(probs) == g.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

ModelConfig resolve_model_config(const ModelConfig& base, const Dataset& dataset) {
    ModelConfig m = base;
    m.feature_dim = dataset.feature_dim;
    m.num_classes = dataset.num_classes;
    return m;
}

namespace {

double select_learning_rate(const Dataset& dataset, std::span<const std::size_t> train, const TrainConfig& config,
                            std::uint64_t fold_seed, const AdjacencyCache& cache, const TrainHooks& hooks) {
    std::vector<std::size_t> labels;
    labels.reserve(train.size());
    for (std::size_t gi : train) labels.push_back(dataset.graphs[gi].label);
    // Hold out one ninth of the training graphs (the outer split's ratio);
    // small training sets fall back to as many folds as the rarest class allows.
    std::map<std::size_t, std::size_t> per_class;
    for (std::size_t l : labels) ++per_class[l];
    std::size_t rarest = labels.size();
    for (const auto& [cls, count] : per_class) rarest = std::min(rarest, count);
    const std::size_t inner_folds = std::clamp<std::size_t>(rarest, 2, 9);
    const auto inner = stratified_kfold(labels, inner_folds, mix_seed(fold_seed, 0x11));
    std::vector<std::size_t> inner_train, inner_val;
    for (std::size_t i : inner[0].train) inner_train.push_back(train[i]);
    for (std::size_t i : inner[0].test) inner_val.push_back(train[i]);

    const std::size_t epochs = config.grid_epochs == 0 ? config.epochs : config.grid_epochs;
    double best_lr = config.lr_grid.front();
    double best_acc = -1.0;
    for (double lr : config.lr_grid) {
        ModelParams params = init_params(config.model, fold_seed);
        AdamState state = AdamState::for_params(params);
        Rng rng(mix_seed(fold_seed, 0x22));
        for (std::size_t e = 0; e < epochs; ++e) {
            train_epoch(params, state, dataset, inner_train, config, lr, rng, &cache, &hooks);
        }
        // Validation graphs come from the training fold.
        for (std::size_t gi : inner_val) {
            if (hooks.on_train_graph) hooks.on_train_graph(gi);
        }
        const double acc = evaluate(params, config.model, dataset, inner_val, &cache);
        if (acc > best_acc) {
            best_acc = acc;
            best_lr = lr;
        }
    }
    return best_lr;
}

FoldReport run_fold(const Dataset& dataset, const TrainConfig& config, const Split& split, std::size_t fold,
                    const AdjacencyCache& cache, const TrainHooks& hooks) {
    FoldReport report;
    report.fold = fold;
    report.seed = config.seed + fold;
    report.test_indices = split.test;
    report.learning_rate = config.lr_grid.empty()
                               ? config.learning_rate
                               : select_learning_rate(dataset, split.train, config, report.seed, cache, hooks);

    report.params = init_params(config.model, report.seed);
    AdamState state = AdamState::for_params(report.params);
    Rng rng(mix_seed(report.seed, 0x33));
    report.trace.reserve(config.epochs);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        EpochStats stats =
            train_epoch(report.params, state, dataset, split.train, config, report.learning_rate, rng, &cache, &hooks);
        stats.test_accuracy = evaluate(report.params, config.model, dataset, split.test, &cache);
        report.trace.push_back(stats);
    }
    report.test_accuracy = report.trace.back().test_accuracy;
    return report;
}

}  // namespace

CVReport run_cv(const Dataset& dataset, const TrainConfig& config_in, const CvOptions& options) {
    TrainConfig config = config_in;
    config.model = resolve_model_config(config.model, dataset);
    config.validate();

    const auto splits = stratified_kfold(dataset, config.folds, config.seed);
    const AdjacencyCache cache(dataset);

    CVReport report;
    report.dataset = dataset.name;
    report.config = config;
    report.folds.resize(splits.size());

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t f = next.fetch_add(1);
            if (f >= splits.size()) return;
            try {
                FoldReport fr = run_fold(dataset, config, splits[f], f, cache, options.hooks);
                std::lock_guard lock(mu);
                if (options.on_fold_done) options.on_fold_done(fr);
                report.folds[f] = std::move(fr);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next.store(splits.size());
                return;
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, splits.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<double> accs;
    for (const FoldReport& fr : report.folds) accs.push_back(fr.test_accuracy);
    std::tie(report.mean_accuracy, report.std_accuracy) = mean_std(accs);
    return report;
}

}  // namespace dagcn
