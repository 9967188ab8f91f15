#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/eval/experiment.hpp"

namespace serprobe::eval {

nlohmann::json to_json(const RunReport& report);

// The fields the text renderings need, recovered from a report JSON.
struct ReportSummary {
  std::string label;
  std::string variant;
  std::string norm;
  std::string protocol;
  std::size_t num_seeds = 0;
  double mean_uar = 0.0;
  double std_uar = 0.0;
  bool aggregating = false;
  std::vector<double> mean_normalized_alpha;
};

ReportSummary summarize(const nlohmann::json& report);

// Rows are variants, the UAR cell is "mean ± std" in percent.
std::string format_results_table(std::span<const ReportSummary> rows);

// Top-3 layers by mean normalized weight, or a note when the weights are
// uniform or the model has a single stream.
std::string format_weight_summary(const ReportSummary& summary);

// Writes under out_dir:
//   report.json, table.txt, layer_weights.csv (means over runs), and per
//   run runs/fold<F>_seed<S>/{model.ckpt, history.json, layer_weights.csv}.
void write_artifacts(const RunReport& report, const std::filesystem::path& out_dir);

nlohmann::json read_report(const std::filesystem::path& run_dir);

}  // namespace serprobe::eval
