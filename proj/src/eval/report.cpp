#include "serprobe/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "serprobe/detail/bytes.hpp"
#include "serprobe/nn/checkpoint.hpp"

namespace serprobe::eval {

using nlohmann::json;

namespace {

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json confusion_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  serprobe::detail::write_file_bytes(path, std::vector<char>(text.begin(), text.end()));
}

std::string run_dir_name(const RunResult& r) {
  return "fold" + std::to_string(r.fold_id) + "_seed" + std::to_string(r.seed);
}

}  // namespace

json to_json(const RunReport& report) {
  json config = to_json(report.spec);
  config["model"] = nn::to_json(report.model);
  json runs = json::array();
  for (const auto& r : report.runs) {
    json per_class = json::array();
    for (double v : r.recall.per_class) per_class.push_back(nullable(v));
    runs.push_back({{"fold", r.fold_id},
                    {"seed", r.seed},
                    {"num_train", r.num_train},
                    {"num_val", r.num_val},
                    {"num_test", r.num_test},
                    {"uar", r.recall.uar},
                    {"per_class_recall", per_class},
                    {"excluded_classes", r.recall.excluded_classes},
                    {"confusion", confusion_json(r.confusion)},
                    {"alpha_raw", r.weights.raw},
                    {"alpha_normalized", r.weights.normalized},
                    {"best_epoch", r.history.best_epoch},
                    {"epochs_run", r.history.epochs.size()},
                    {"stopped_early", r.history.stopped_early},
                    {"artifacts", "runs/" + run_dir_name(r)}});
  }
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold_id},
                     {"test_group", f.test_group},
                     {"val_group", f.val_group},
                     {"mean_uar", f.mean_uar},
                     {"std_uar", f.std_uar}});
  }
  json seeds = json::array();
  for (const auto& s : report.seeds) seeds.push_back({{"seed", s.seed}, {"pooled_uar", s.pooled_uar}});
  const bool aggregating = report.model.num_layers > 1;
  return {{"format", "serprobe-run-report"},
          {"version", 1},
          {"config", config},
          {"protocol_note", protocol_note(report.spec.protocol)},
          {"norm_note", report.spec.norm == NormMode::speaker
                            ? "norm: speaker (statistics over all utterances of each speaker, test included)"
                            : "norm: global (statistics over training and validation partitions only)"},
          {"label_names", report.label_names},
          {"runs", runs},
          {"folds", folds},
          {"seeds", seeds},
          {"summary",
           {{"mean_uar", report.mean_uar},
            {"std_uar", report.std_uar},
            {"std_kind", "population std over per-seed pooled UAR (pooled = mean over folds)"},
            {"num_seeds", report.seeds.size()}}},
          {"layer_weights",
           {{"aggregating", aggregating},
            {"mean_normalized", report.mean_normalized_alpha},
            {"std_normalized", report.std_normalized_alpha}}}};
}

ReportSummary summarize(const json& report) {
  try {
    ReportSummary s;
    const auto& cfg = report.at("config");
    s.label = cfg.at("label").get<std::string>();
    s.variant = cfg.at("model").at("variant").get<std::string>();
    s.norm = cfg.at("norm").get<std::string>();
    s.protocol = cfg.at("protocol").at("name").get<std::string>();
    const auto& sum = report.at("summary");
    s.num_seeds = sum.at("num_seeds").get<std::size_t>();
    s.mean_uar = sum.at("mean_uar").get<double>();
    s.std_uar = sum.at("std_uar").get<double>();
    const auto& lw = report.at("layer_weights");
    s.aggregating = lw.at("aggregating").get<bool>();
    s.mean_normalized_alpha = lw.at("mean_normalized").get<std::vector<double>>();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed run report: ") + e.what());
  }
}

std::string format_results_table(std::span<const ReportSummary> rows) {
  std::size_t width = std::string("Experiment").size();
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-7s  %-8s  %-12s  %5s  %s\n", static_cast<int>(width),
                "Experiment", "Model", "Norm", "Protocol", "Seeds", "UAR (%)");
  out << line;
  out << std::string(width + 2 + 7 + 2 + 8 + 2 + 12 + 2 + 5 + 2 + 13, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %-7s  %-8s  %-12s  %5zu  %.1f ± %.1f\n",
                  static_cast<int>(width), r.label.c_str(), r.variant.c_str(), r.norm.c_str(),
                  r.protocol.c_str(), r.num_seeds, 100.0 * r.mean_uar, 100.0 * r.std_uar);
    out << line;
  }
  return out.str();
}

std::string format_weight_summary(const ReportSummary& s) {
  std::ostringstream out;
  out << s.label << ": ";
  const auto& w = s.mean_normalized_alpha;
  if (!s.aggregating || w.size() < 2) {
    out << "single-stream model, no layer weights\n";
    return out.str();
  }
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  if (*hi - *lo < 1e-6) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "layer weights uniform (%.4f each over %zu layers)\n", *hi, w.size());
    out << buf;
    return out.str();
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  out << "top layers by normalized weight:";
  for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %zu (%.4f)", order[k], w[order[k]]);
    out << buf;
  }
  out << '\n';
  return out.str();
}

void write_artifacts(const RunReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const json j = to_json(report);
  write_text(out_dir / "report.json", j.dump(2) + "\n");
  const ReportSummary summary = summarize(j);
  write_text(out_dir / "table.txt", format_results_table(std::span<const ReportSummary>(&summary, 1)));

  std::ostringstream csv;
  csv.precision(9);
  // means over all (fold, seed) runs
  csv << "layer_index,raw_alpha,normalized_alpha,normalized_alpha_std\n";
  for (std::size_t l = 0; l < report.mean_normalized_alpha.size(); ++l) {
    double raw = 0.0;
    for (const auto& r : report.runs) raw += r.weights.raw.at(l);
    raw /= static_cast<double>(std::max<std::size_t>(report.runs.size(), 1));
    csv << l << ',' << raw << ',' << report.mean_normalized_alpha[l] << ',' << report.std_normalized_alpha[l]
        << '\n';
  }
  write_text(out_dir / "layer_weights.csv", csv.str());

  for (const auto& r : report.runs) {
    const auto dir = out_dir / "runs" / run_dir_name(r);
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(report.model, r.params, dir / "model.ckpt");
    write_text(dir / "history.json", optim::to_json(r.history).dump(2) + "\n");
    write_text(dir / "layer_weights.csv", layer_weights_csv(r.weights));
  }
}

json read_report(const std::filesystem::path& run_dir) {
  const auto path = std::filesystem::is_directory(run_dir) ? run_dir / "report.json" : run_dir;
  std::ifstream in(path);
  if (!in) throw Error("no run report at " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("corrupt run report " + path.string() + ": " + e.what());
  }
}

}  // namespace serprobe::eval
