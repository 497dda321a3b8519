// SPDX-License-Identifier: Apache-2.0
//
// Versioned results JSON and Markdown summary tables.
#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "json.hpp"
#include "vlu/datasets.hpp"
#include "vlu/probing.hpp"

namespace vlu {

inline constexpr int kResultsSchema = 1;

struct TaskSummary {
  std::string task;
  std::string provider;
  std::string method;
  std::string kind;
  std::size_t items = 0;
  LoadReport load_report;
  TaskResult result;
};

/// {schema, task, provider, method, kind, items, load_report, skipped,
///  metrics: [{metric, name, per_prompt, max, mean, std, best_prompt, ci?}]}
nlohmann::ordered_json results_json(const TaskSummary& summary, std::span<const MetricSpec> metrics);
/// One row per (task, metric): max, mean and std at three decimals.
void write_markdown(std::ostream& os, std::span<const nlohmann::ordered_json> results);

}  // namespace vlu
