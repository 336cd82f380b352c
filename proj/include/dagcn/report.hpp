#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "dagcn/training.hpp"

namespace dagcn {

/// Columns: fold,epoch,train_loss,train_acc,test_acc (epochs 1-based).
void write_trace_csv(const CVReport& report, std::ostream& out);
void write_trace_csv(const CVReport& report, const std::filesystem::path& path);

/// Human-readable summary; states that the deviation is taken over folds.
void write_report_text(const CVReport& report, std::ostream& out);

/// Machine-readable summary (no parameters).
void write_report_json(const CVReport& report, const std::filesystem::path& path);

/// "87.22 ± 6.10" style, accuracies in percent.
std::string format_mean_std(double mean, double std);

/// Writes config echo, report.txt, report.json, trace.csv and one checkpoint
/// per fold (fold_XX.ckpt.json) into `dir`.
struct RunConfig;
void write_run_outputs(const CVReport& report, const RunConfig& config, const std::filesystem::path& dir);

}  // namespace dagcn
