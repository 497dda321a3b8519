// SPDX-License-Identifier: Apache-2.0
#include "vlu/results.hpp"

#include <cstdio>
#include <ostream>

namespace vlu {
namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json results_json(const TaskSummary& s, std::span<const MetricSpec> metrics) {
  nlohmann::ordered_json j;
  j["schema"] = kResultsSchema;
  j["task"] = s.task;
  j["provider"] = s.provider;
  j["method"] = s.method;
  j["kind"] = s.kind;
  j["items"] = s.items;
  auto& lr = j["load_report"];
  lr["input"] = s.load_report.input_count;
  lr["kept"] = s.load_report.kept;
  lr["dropped"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : s.load_report.dropped) lr["dropped"][reason] = n;
  auto& skipped = j["skipped"];
  skipped = nlohmann::ordered_json::object();
  for (const auto& p : s.result.prompts) skipped[p.prompt_id] = p.skipped;
  auto& arr = j["metrics"];
  arr = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < s.result.metrics.size(); ++m) {
    const auto& r = s.result.metrics[m];
    nlohmann::ordered_json row;
    row["metric"] = r.metric;
    row["name"] = m < metrics.size() ? metrics[m].name() : r.metric;
    auto& pp = row["per_prompt"];
    pp = nlohmann::ordered_json::object();
    for (const auto& [id, v] : r.per_prompt) pp[id] = v;
    row["max"] = r.max;
    row["mean"] = r.mean;
    row["std"] = r.std;
    row["best_prompt"] = r.best_prompt;
    if (r.ci) {
      row["ci"] = {{"lo", r.ci->lo}, {"hi", r.ci->hi}, {"level", r.ci_level}};
    }
    arr.push_back(std::move(row));
  }
  return j;
}

void write_markdown(std::ostream& os, std::span<const nlohmann::ordered_json> results) {
  os << "| task | provider | method | metric | max | mean | std | best |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& j : results) {
    for (const auto& m : j["metrics"]) {
      os << "| " << j["task"].get<std::string>() << " | " << j["provider"].get<std::string>() << " | "
         << j["method"].get<std::string>() << " | " << m["metric"].get<std::string>() << " | "
         << fixed3(m["max"].get<double>()) << " | " << fixed3(m["mean"].get<double>()) << " | "
         << fixed3(m["std"].get<double>()) << " | " << m["best_prompt"].get<std::string>() << " |\n";
    }
  }
}

}  // namespace vlu
