#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/eval/experiment.hpp"

namespace serprobe::cli {

enum ExitCode : int { kSuccess = 0, kValidationError = 1, kRuntimeError = 2 };

enum class DatasetKind { iemocap_like, ravdess_like, custom };

// A train-eval configuration file, after defaults are applied and relative
// paths are resolved against the file's directory.
struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::custom;
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  eval::ExperimentSpec spec;
};

// Parses the JSON configuration text. Unknown keys and bad values raise
// ValidationError naming the offending field.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace serprobe::cli
