#include "dagcn/report.hpp"

#include <cstdio>
#include <fstream>

#include "dagcn/checkpoint.hpp"
#include "dagcn/run_config.hpp"

namespace dagcn {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string format_mean_std(double mean, double std) {
    return fixed(100.0 * mean, 2) + " ± " + fixed(100.0 * std, 2);
}

void write_trace_csv(const CVReport& report, std::ostream& out) {
    out << "fold,epoch,train_loss,train_acc,test_acc\n";
    for (const FoldReport& f : report.folds) {
        for (std::size_t e = 0; e < f.trace.size(); ++e) {
            const EpochStats& s = f.trace[e];
            out << f.fold << ',' << e + 1 << ',' << num(s.train_loss) << ',' << num(s.train_accuracy) << ','
                << num(s.test_accuracy) << '\n';
        }
    }
}

void write_trace_csv(const CVReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_trace_csv(report, out);
}

void write_report_text(const CVReport& report, std::ostream& out) {
    const ModelConfig& m = report.config.model;
    out << "dataset: " << report.dataset << '\n'
        << "protocol: " << report.config.folds << "-fold stratified cross-validation; "
        << "std is the population standard deviation over folds\n"
        << "model: k=" << m.k << " m=" << m.m << " hidden=" << m.hidden << " r=" << m.r
        << " nonlinearity=" << to_string(m.nonlinearity) << " hop_attention=" << to_string(m.hop_attention) << '\n'
        << "train: epochs=" << report.config.epochs << " batch=" << report.config.batch_size
        << " lr=" << num(report.config.learning_rate) << " l2=" << num(report.config.l2)
        << " seed=" << report.config.seed << '\n';
    for (const FoldReport& f : report.folds) {
        out << "fold " << f.fold << ": test_acc=" << fixed(f.test_accuracy, 4) << " lr=" << num(f.learning_rate)
            << " final_train_loss=" << fixed(f.trace.empty() ? 0.0 : f.trace.back().train_loss, 6) << '\n';
    }
    out << "mean_accuracy: " << num(report.mean_accuracy) << '\n'
        << "std_accuracy: " << num(report.std_accuracy) << '\n'
        << "summary: " << format_mean_std(report.mean_accuracy, report.std_accuracy) << '\n';
}

void write_report_json(const CVReport& report, const std::filesystem::path& path) {
    nlohmann::json folds = nlohmann::json::array();
    for (const FoldReport& f : report.folds) {
        folds.push_back({{"fold", f.fold},
                         {"seed", f.seed},
                         {"learning_rate", f.learning_rate},
                         {"test_accuracy", f.test_accuracy},
                         {"test_indices", f.test_indices}});
    }
    nlohmann::json model = model_config_to_json(report.config.model);
    const nlohmann::json j{{"dataset", report.dataset},
                           {"std_over", "folds"},
                           {"mean_accuracy", report.mean_accuracy},
                           {"std_accuracy", report.std_accuracy},
                           {"train", train_config_to_json(report.config)},
                           {"model", model},
                           {"folds", folds}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_run_outputs(const CVReport& report, const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_run_config(config, dir / "config.json");
    {
        std::ofstream out(dir / "report.txt");
        if (!out) throw IoError("cannot write " + (dir / "report.txt").string());
        write_report_text(report, out);
    }
    write_report_json(report, dir / "report.json");
    write_trace_csv(report, dir / "trace.csv");
    for (const FoldReport& f : report.folds) {
        Checkpoint ck;
        ck.config = report.config.model;
        ck.seed = f.seed;
        ck.params = f.params;
        ck.dataset = report.dataset;
        ck.fold = f.fold;
        ck.learning_rate = f.learning_rate;
        ck.test_indices = f.test_indices;
        ck.test_accuracy = f.test_accuracy;
        char name[32];
        std::snprintf(name, sizeof name, "fold_%02zu.ckpt.json", f.fold);
        save_checkpoint(ck, dir / name);
    }
}

}  // namespace dagcn
