// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance --group core       criteria 1-4 (self-contained)
//   acceptance --group datasets   criteria 5-9 (TU benchmark files required)
//
// Dataset files are looked up under $DAGCN_DATA_DIR, falling back to
// $DAGCN_DATA_DIR_DEFAULT, then ./data; either <dir>/<NAME>/<NAME>_A.txt or
// <dir>/<NAME>_A.txt is accepted.
#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dagcn/graph_io.hpp"
#include "dagcn/report.hpp"
#include "dagcn/training.hpp"
#include "dagcn/verification.hpp"

using namespace dagcn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& what, const Outcome& o) {
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, what.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- core ----------------------------------------------------------------

Outcome gradient_oracle() {
    const auto start = Clock::now();
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto rep = verification::gradcheck_model(verification::gradcheck_config(), seed, 6, 1e-5);
        worst = std::max(worst, rep.worst);
        ok = ok && rep.passed(1e-4) && !rep.entries.empty();
    }
    const double secs = seconds_since(start);
    return {ok && secs < 60.0,
            "max relative error " + fmt("%.3e", worst) + " over 5 seeds (tol 1e-4), " + fmt("%.2f s", secs) +
                " (limit 60 s)"};
}

Outcome reference_transcript() {
    const auto start = Clock::now();
    const auto inst = verification::fixed_transcript_instance();
    ForwardTrace trace;
    predict(inst.graph, inst.params, inst.config, &trace);
    const auto cmp = verification::compare_transcript(
        verification::reference_forward(inst.graph, inst.params, inst.config), trace);
    const double secs = seconds_since(start);
    return {cmp.passed(1e-10) && secs < 1.0,
            "worst deviation " + fmt("%.3e", cmp.worst) + " over " + std::to_string(cmp.deviations.size()) +
                " intermediates (tol 1e-10), " + fmt("%.4f s", secs) + " (limit 1 s)"};
}

Outcome permutation_invariance() {
    const auto rep = verification::permutation_suite(100, 2024);
    return {rep.passed(1e-9), "worst probability deviation " + fmt("%.3e", rep.worst) + " over 100 trials (tol 1e-9)"};
}

Outcome mean_pool_degeneracy() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ModelConfig cfg = verification::gradcheck_config();
        ModelParams params = init_params(cfg, seed);
        params.pool_u2.fill(0.0);
        const Graph g = verification::random_graph(4 + seed, cfg.feature_dim, cfg.num_classes, 0.4, seed * 7);
        ForwardTrace trace;
        predict(g, params, cfg, &trace);
        const Matrix& G = trace.node_repr;
        for (std::size_t j = 0; j < G.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t v = 0; v < G.rows(); ++v) mean += G(v, j);
            mean /= static_cast<double>(G.rows());
            for (std::size_t q = 0; q < cfg.r; ++q) worst = std::max(worst, std::abs(trace.embedding(q, j) - mean));
        }
    }
    return {worst <= 1e-12, "worst |M - colmean(G)| " + fmt("%.3e", worst) + " over 5 graphs (tol 1e-12)"};
}

// ---- datasets ------------------------------------------------------------

fs::path data_root() {
    if (const char* d = std::getenv("DAGCN_DATA_DIR"); d && *d) return d;
    if (const char* d = std::getenv("DAGCN_DATA_DIR_DEFAULT"); d && *d) return d;
    return "data";
}

struct Located {
    fs::path dir;
    std::string name;
};

// PTC is distributed under the name of one of its four variants; MR is the usual choice.
std::optional<Located> locate(const std::string& name) {
    std::vector<std::string> names{name};
    if (name == "PTC") names.push_back("PTC_MR");
    for (const auto& n : names) {
        for (const fs::path& dir : {data_root() / n, data_root()}) {
            if (fs::exists(dir / (n + "_A.txt"))) return Located{dir, n};
        }
    }
    return std::nullopt;
}

std::optional<Dataset> load(const std::string& name, std::string& why) {
    const auto where = locate(name);
    if (!where) {
        why = name + " files not found under " + data_root().string();
        return std::nullopt;
    }
    try {
        return load_tu_dataset(where->dir, where->name);
    } catch (const std::exception& e) {
        why = e.what();
        return std::nullopt;
    }
}

Outcome loader_fidelity() {
    struct Row {
        const char* name;
        std::size_t graphs;
        double avg;      // < 0: not gated
        std::size_t max; // 0: not gated
    };
    const Row rows[] = {
        {"MUTAG", 188, 17.93, 0}, {"ENZYMES", 600, 32.60, 0}, {"NCI1", 4110, -1.0, 111},
        {"NCI109", 4127, 29.60, 0}, {"PROTEINS", 1113, 39.06, 0}, {"PTC", 344, 25.56, 0},
    };
    bool ok = true;
    std::string detail;
    for (const Row& r : rows) {
        std::string why;
        const auto ds = load(r.name, why);
        if (!detail.empty()) detail += "; ";
        if (!ds) {
            ok = false;
            detail += why;
            continue;
        }
        const DatasetStats s = compute_stats(*ds);
        bool row_ok = s.graphs == r.graphs;
        if (r.avg >= 0.0) row_ok = row_ok && std::abs(s.mean_nodes - r.avg) <= 0.01 + 1e-9;
        if (r.max > 0) row_ok = row_ok && s.max_nodes == r.max;
        ok = ok && row_ok;
        detail += std::string(r.name) + " " + std::to_string(s.graphs) + "/" + fmt("%.2f", s.mean_nodes) + "/max " +
                  std::to_string(s.max_nodes) + (row_ok ? "" : " (mismatch)");
    }
    return {ok, detail};
}

struct CvRun {
    CVReport report;
    std::string csv;
    double seconds = 0.0;
};

CvRun run_protocol(const Dataset& ds) {
    TrainConfig cfg;  // defaults: h=64, batch 50, 200 epochs, lr 0.001, 10 folds, seed 1
    const auto start = Clock::now();
    CvOptions opts;
    opts.on_fold_done = [](const FoldReport& f) {
        std::printf("      fold %zu: test accuracy %.4f\n", f.fold, f.test_accuracy);
        std::fflush(stdout);
    };
    CvRun run;
    run.report = run_cv(ds, cfg, opts);
    run.seconds = seconds_since(start);
    std::ostringstream out;
    write_trace_csv(run.report, out);
    run.csv = out.str();
    return run;
}

Outcome reproduction(const std::optional<CvRun>& run, const std::string& why, double threshold) {
    if (!run) return {false, why};
    return {run->report.mean_accuracy >= threshold,
            "10-fold accuracy " + format_mean_std(run->report.mean_accuracy, run->report.std_accuracy) +
                " (std over folds), threshold " + fmt("%.2f", threshold) + ", " + fmt("%.0f s", run->seconds)};
}

Outcome smoke(const std::vector<std::string>& names) {
    bool ok = true;
    std::string detail;
    for (const auto& name : names) {
        if (!detail.empty()) detail += "; ";
        std::string why;
        const auto ds = load(name, why);
        if (!ds) {
            ok = false;
            detail += why;
            continue;
        }
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.model = resolve_model_config(cfg.model, *ds);
        const auto split = stratified_kfold(*ds, cfg.folds, cfg.seed)[0];
        ModelParams params = init_params(cfg.model, cfg.seed);
        AdamState state = AdamState::for_params(params);
        Rng rng(mix_seed(cfg.seed, 0x33));
        const AdjacencyCache cache(*ds);
        bool finite = true;
        for (std::size_t e = 0; e < cfg.epochs; ++e) {
            const EpochStats st = train_epoch(params, state, *ds, split.train, cfg, cfg.learning_rate, rng, &cache);
            finite = finite && std::isfinite(st.train_loss);
        }
        params.for_each([&](const std::string&, const Matrix& m) {
            for (double v : m.values()) finite = finite && std::isfinite(v);
        });
        std::vector<std::size_t> counts(ds->num_classes, 0);
        for (std::size_t i : split.train) ++counts[ds->graphs[i].label];
        const double majority = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                                static_cast<double>(split.train.size());
        const double train_acc = evaluate(params, cfg.model, *ds, split.train, &cache);
        const bool row_ok = finite && train_acc > majority;
        ok = ok && row_ok;
        detail += name + " train acc " + fmt("%.4f", train_acc) + " vs majority " + fmt("%.4f", majority) +
                  (finite ? "" : " (non-finite values)");
    }
    return {ok, detail};
}

void run_datasets() {
    report(5, "loader statistics match the benchmark table", loader_fidelity());

    std::string why_mutag;
    std::optional<CvRun> mutag_a;
    if (const auto ds = load("MUTAG", why_mutag)) mutag_a = run_protocol(*ds);
    report(6, "MUTAG 10-fold accuracy >= 0.80", reproduction(mutag_a, why_mutag, 0.80));

    std::string why_ptc;
    std::optional<CvRun> ptc;
    if (const auto ds = load("PTC", why_ptc)) ptc = run_protocol(*ds);
    report(7, "PTC 10-fold accuracy >= 0.55", reproduction(ptc, why_ptc, 0.55));

    report(8, "NCI1/NCI109/ENZYMES 20-epoch smoke beats the majority baseline", smoke({"NCI1", "NCI109", "ENZYMES"}));

    Outcome det{false, why_mutag};
    if (mutag_a) {
        const auto ds = load("MUTAG", why_mutag);
        const CvRun mutag_b = run_protocol(*ds);
        det.pass = mutag_a->csv == mutag_b.csv;
        det.detail = std::string("trace CSVs of two identical-seed MUTAG runs are ") +
                     (det.pass ? "byte-identical" : "different") + " (" + std::to_string(mutag_a->csv.size()) +
                     " bytes)";
    }
    report(9, "determinism of repeated MUTAG runs", det);
}

void run_core() {
    report(1, "gradient oracle", gradient_oracle());
    report(2, "reference transcript", reference_transcript());
    report(3, "permutation invariance", permutation_invariance());
    report(4, "mean-pooling degeneracy", mean_pool_degeneracy());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string group = "all";
    app.add_option("--group", group, "core, datasets or all")->check(CLI::IsMember({"core", "datasets", "all"}));
    CLI11_PARSE(app, argc, argv);

    if (group == "core" || group == "all") run_core();
    if (group == "datasets" || group == "all") run_datasets();
    std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "NOT ACCEPTED", failures);
    return failures == 0 ? 0 : 1;
}
