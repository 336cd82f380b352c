// Command-line entry point: train, eval, gradcheck, verify, data-stats.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dagcn/checkpoint.hpp"
#include "dagcn/graph_io.hpp"
#include "dagcn/kernels.hpp"
#include "dagcn/report.hpp"
#include "dagcn/run_config.hpp"
#include "dagcn/training.hpp"
#include "dagcn/verification.hpp"

namespace {

using namespace dagcn;

constexpr double kGradTol = 1e-4;
constexpr double kTranscriptTol = 1e-10;
constexpr double kPermutationTol = 1e-9;
constexpr double kMeanPoolTol = 1e-12;

struct CommonFlags {
    std::string config;
    std::string dataset;
    std::string name;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
};

RunConfig resolve(const CommonFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (!f.dataset.empty()) c.dataset_dir = f.dataset;
    if (!f.name.empty()) c.dataset_name = f.name;
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.seed) c.train.seed = *f.seed;
    if (f.jobs) c.jobs = *f.jobs;
    return c;
}

int cmd_train(const CommonFlags& flags, std::optional<std::size_t> epochs) {
    RunConfig cfg = resolve(flags);
    if (epochs) cfg.train.epochs = *epochs;
    const Dataset ds = load_tu_dataset(cfg.dataset_dir, cfg.dataset_name, cfg.load);
    std::printf("dataset %s: %zu graphs, %zu classes, feature_dim %zu (kernels: %s)\n", ds.name.c_str(),
                ds.graphs.size(), ds.num_classes, ds.feature_dim, std::string(kernels::active().name).c_str());
    CvOptions opts;
    opts.jobs = cfg.jobs;
    opts.on_fold_done = [](const FoldReport& f) {
        std::printf("fold %zu: test_acc=%.4f lr=%g final_train_loss=%.6f\n", f.fold, f.test_accuracy, f.learning_rate,
                    f.trace.back().train_loss);
        std::fflush(stdout);
    };
    const CVReport report = run_cv(ds, cfg.train, opts);
    write_run_outputs(report, cfg, cfg.output_dir);
    std::printf("accuracy over %zu folds: %s (std over folds)\n", report.folds.size(),
                format_mean_std(report.mean_accuracy, report.std_accuracy).c_str());
    std::printf("outputs written to %s\n", cfg.output_dir.string().c_str());
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
    const RunConfig cfg = resolve(flags);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const Dataset ds = load_tu_dataset(cfg.dataset_dir, ck.dataset.empty() ? cfg.dataset_name : ck.dataset, cfg.load);
    if (ds.feature_dim != ck.config.feature_dim || ds.num_classes != ck.config.num_classes) {
        std::fprintf(stderr, "checkpoint expects feature_dim %zu / %zu classes, dataset has %zu / %zu\n",
                     ck.config.feature_dim, ck.config.num_classes, ds.feature_dim, ds.num_classes);
        return 1;
    }
    std::vector<std::size_t> indices = ck.test_indices;
    if (indices.empty()) {
        indices.resize(ds.graphs.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    }
    for (std::size_t i : indices) {
        if (i >= ds.graphs.size()) {
            std::fprintf(stderr, "checkpoint test index %zu out of range\n", i);
            return 1;
        }
    }
    const double acc = evaluate(ck.params, ck.config, ds, indices);
    std::printf("fold %zu: accuracy=%.17g on %zu graphs (stored %.17g)\n", ck.fold, acc, indices.size(),
                ck.test_accuracy);
    if (!ck.test_indices.empty() && acc != ck.test_accuracy) {
        std::fprintf(stderr, "accuracy differs from the value stored in the checkpoint\n");
        return 1;
    }
    return 0;
}

bool run_gradcheck(std::uint64_t base_seed, std::size_t seeds, bool inject_fault) {
    std::optional<autodiff::ScopedBackwardFault> fault;
    if (inject_fault) fault.emplace(autodiff::OpKind::Tanh, 1.5);
    const ModelConfig cfg = verification::gradcheck_config();
    std::printf("gradcheck: n=6 h=%zu k=%zu m=%zu r=%zu eps=1e-5 tol=%g%s\n", cfg.hidden, cfg.k, cfg.m, cfg.r, kGradTol,
                inject_fault ? " [fault injected into tanh backward]" : "");
    bool ok = true;
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto report = verification::gradcheck_model(cfg, base_seed + s);
        std::printf("  seed %llu: worst %.3e %s\n", static_cast<unsigned long long>(report.seed), report.worst,
                    report.passed(kGradTol) ? "PASS" : "FAIL");
        for (const auto& e : report.entries) {
            std::printf("    %-20s %4zu entries  max_rel_err %.3e\n", e.name.c_str(), e.entries, e.max_rel_error);
        }
        ok = ok && report.passed(kGradTol);
    }
    return ok;
}

bool run_transcript() {
    const auto inst = verification::fixed_transcript_instance();
    ForwardTrace trace;
    predict(inst.graph, inst.params, inst.config, &trace);
    const auto ref = verification::reference_forward(inst.graph, inst.params, inst.config);
    const auto cmp = verification::compare_transcript(ref, trace);
    std::printf("reference transcript (3-node path): worst deviation %.3e tol=%g %s\n", cmp.worst, kTranscriptTol,
                cmp.passed(kTranscriptTol) ? "PASS" : "FAIL");
    for (const auto& d : cmp.deviations) std::printf("    %-14s %.3e\n", d.quantity.c_str(), d.max_abs);
    return cmp.passed(kTranscriptTol);
}

bool run_permutation(std::uint64_t seed) {
    const auto rep = verification::permutation_suite(100, seed);
    std::printf("permutation suite: %zu trials, worst deviation %.3e tol=%g %s\n", rep.trials, rep.worst,
                kPermutationTol, rep.passed(kPermutationTol) ? "PASS" : "FAIL");
    return rep.passed(kPermutationTol);
}

bool run_mean_pool(std::uint64_t seed) {
    ModelConfig cfg = verification::gradcheck_config();
    ModelParams params = init_params(cfg, seed);
    params.pool_u2.fill(0.0);
    const Graph g = verification::random_graph(7, cfg.feature_dim, cfg.num_classes, 0.4, seed + 1);
    ForwardTrace trace;
    predict(g, params, cfg, &trace);
    double worst = 0.0;
    const Matrix& G = trace.node_repr;
    for (std::size_t j = 0; j < G.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t v = 0; v < G.rows(); ++v) mean += G(v, j);
        mean /= static_cast<double>(G.rows());
        for (std::size_t q = 0; q < cfg.r; ++q) worst = std::max(worst, std::abs(trace.embedding(q, j) - mean));
    }
    std::printf("mean-pool degeneracy (u2 = 0): worst deviation %.3e tol=%g %s\n", worst, kMeanPoolTol,
                worst <= kMeanPoolTol ? "PASS" : "FAIL");
    return worst <= kMeanPoolTol;
}

int cmd_data_stats(const CommonFlags& flags) {
    const RunConfig cfg = resolve(flags);
    const Dataset ds = load_tu_dataset(cfg.dataset_dir, cfg.dataset_name, cfg.load);
    const DatasetStats s = compute_stats(ds);
    std::printf("dataset: %s\n", ds.name.c_str());
    std::printf("graphs: %zu, max nodes: %zu, avg nodes: %.2f\n", s.graphs, s.max_nodes, s.mean_nodes);
    std::printf("feature dim: %zu (%s)\n", s.feature_dim, std::string(to_string(ds.scheme)).c_str());
    std::printf("classes: %zu\n", ds.num_classes);
    for (const auto& [raw, idx] : ds.label_map) {
        std::printf("  class %zu (label %ld): %zu graphs\n", idx, raw, s.class_histogram[idx]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual attention graph convolutional network: training and verification"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run configuration");
        sub->add_option("--dataset", flags.dataset, "directory holding the TU files");
        sub->add_option("--name", flags.name, "dataset name (file prefix)");
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--seed", flags.seed, "base seed");
        sub->add_option("--jobs", flags.jobs, "folds trained in parallel");
    };

    auto* train = app.add_subcommand("train", "cross-validated training run");
    add_common(train);
    std::optional<std::size_t> epochs;
    train->add_option("--epochs", epochs, "override train.epochs");

    auto* eval = app.add_subcommand("eval", "re-evaluate a fold checkpoint");
    add_common(eval);
    std::string checkpoint;
    eval->add_option("--checkpoint", checkpoint, "fold checkpoint file")->required();

    bool inject_fault = false;
    std::size_t seeds = 5;
    auto* gradcheck = app.add_subcommand("gradcheck", "backward vs. central finite differences");
    add_common(gradcheck);
    gradcheck->add_option("--seeds", seeds, "number of seeds");
    gradcheck->add_flag("--inject-fault", inject_fault, "corrupt the tanh backward rule (self-test)");

    auto* verify = app.add_subcommand("verify", "all oracles: gradients, transcript, permutation, mean pooling");
    add_common(verify);
    verify->add_flag("--inject-fault", inject_fault, "corrupt the tanh backward rule (self-test)");

    auto* stats = app.add_subcommand("data-stats", "dataset statistics");
    add_common(stats);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(flags, epochs);
        if (eval->parsed()) return cmd_eval(flags, checkpoint);
        const std::uint64_t seed = flags.seed.value_or(1);
        if (gradcheck->parsed()) return run_gradcheck(seed, seeds, inject_fault) ? 0 : 1;
        if (verify->parsed()) {
            bool ok = run_gradcheck(seed, 5, inject_fault);
            ok = run_transcript() && ok;
            ok = run_permutation(seed) && ok;
            ok = run_mean_pool(seed) && ok;
            std::printf("verify: %s\n", ok ? "PASS" : "FAIL");
            return ok ? 0 : 1;
        }
        if (stats->parsed()) return cmd_data_stats(flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
