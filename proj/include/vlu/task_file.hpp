// SPDX-License-Identifier: Apache-2.0
//
// JSON task files: a dataset reference, a prompt list, a slot policy and a
// metric list, bound into a TaskSpec.
//
//   {
//     "name": "ctd",
//     "method": "SP",
//     "dataset": {"type": "color", "path": "ctd.jsonl", "variant": "ctd"},
//     "prompts": "prompts/color.txt",
//     "slot_policy": "remove",
//     "metrics": [{"name": "accuracy", "label": "acc_ctd"}],
//     "filter_providers": ["mock:dim=8,seed=1"],
//     "bootstrap": {"n": 200, "level": 0.95, "seed": 0}
//   }
//
// Relative paths resolve against the task file's directory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vlu/datasets.hpp"
#include "vlu/probing.hpp"

namespace vlu {

enum class DatasetType { Concreteness, Color, ShapeIt, Cities, Cbt, Imdb };
DatasetType parse_dataset_type(std::string_view text);
std::string_view to_string(DatasetType type) noexcept;

struct TaskConfig {
  std::string name;
  ProbeMethod method = ProbeMethod::Stroop;
  DatasetType dataset = DatasetType::Color;
  std::filesystem::path dataset_path;
  /// "ctd"/"ncd" for color, "N"/"V"/"P" for cbt.
  std::optional<std::string> variant;
  std::uint64_t seed = 0;
  /// Absent for per-item template datasets (cities, cbt).
  std::optional<std::filesystem::path> prompts_path;
  SlotPolicy slot_policy = RemoveSlot{};
  std::optional<std::vector<std::string>> labels;
  std::vector<MetricSpec> metrics;
  std::vector<std::string> filter_providers;
  std::optional<BootstrapOptions> bootstrap;
};

/// ValidationError for schema violations; IoError when unreadable.
TaskConfig parse_task_config(const std::filesystem::path& path);

struct BuiltTask {
  TaskSpec spec;
  LoadReport load_report;
};

/// Loads the dataset (filters use `filter_providers`) and binds prompts.
BuiltTask build_task(const TaskConfig& config, ProviderList filter_providers);

}  // namespace vlu
