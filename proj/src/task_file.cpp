// SPDX-License-Identifier: Apache-2.0
#include "vlu/task_file.hpp"

#include <fstream>

#include "json.hpp"
#include "vlu/error.hpp"

namespace vlu {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& message) { throw Error(Errc::ValidationError, message); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string get_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) invalid(std::string("task file: '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<PromptTemplate> load_prompts(const TaskConfig& c) {
  if (!c.prompts_path) invalid("task '" + c.name + "' needs a prompts file");
  auto prompts = load_prompt_file(*c.prompts_path, c.slot_policy);
  if (prompts.empty()) invalid("prompt file " + c.prompts_path->string() + " is empty");
  return prompts;
}

std::vector<std::string> default_labels(const TaskConfig& c) {
  if (c.labels) return *c.labels;
  switch (c.dataset) {
    case DatasetType::Color: return {kBasicColors.begin(), kBasicColors.end()};
    case DatasetType::ShapeIt: return {kShapes.begin(), kShapes.end()};
    case DatasetType::Imdb: return {"positive", "negative"};
    default: return {};
  }
}

}  // namespace

DatasetType parse_dataset_type(std::string_view text) {
  if (text == "concreteness") return DatasetType::Concreteness;
  if (text == "color") return DatasetType::Color;
  if (text == "shapeit") return DatasetType::ShapeIt;
  if (text == "cities") return DatasetType::Cities;
  if (text == "cbt") return DatasetType::Cbt;
  if (text == "imdb") return DatasetType::Imdb;
  invalid("unknown dataset type '" + std::string(text) + "'");
}

std::string_view to_string(DatasetType type) noexcept {
  switch (type) {
    case DatasetType::Concreteness: return "concreteness";
    case DatasetType::Color: return "color";
    case DatasetType::ShapeIt: return "shapeit";
    case DatasetType::Cities: return "cities";
    case DatasetType::Cbt: return "cbt";
    case DatasetType::Imdb: return "imdb";
  }
  return "color";
}

TaskConfig parse_task_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open task file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    invalid("task file " + path.string() + ": " + e.what());
  }
  if (!root.is_object()) invalid("task file must hold a JSON object");
  const auto base = path.parent_path();

  TaskConfig c;
  try {
    c.name = get_string(root, "name");
    c.method = parse_probe_method(root.value("method", "SP"));
    if (!root.contains("dataset") || !root["dataset"].is_object()) invalid("task file: 'dataset' must be an object");
    const auto& ds = root["dataset"];
    c.dataset = parse_dataset_type(get_string(ds, "type"));
    c.dataset_path = resolve(base, get_string(ds, "path"));
    if (ds.contains("variant")) c.variant = get_string(ds, "variant");
    c.seed = ds.value("seed", std::uint64_t{0});
    if (root.contains("prompts")) c.prompts_path = resolve(base, get_string(root, "prompts"));
    if (root.contains("slot_policy")) {
      c.slot_policy = parse_slot_policy(get_string(root, "slot_policy"));
    } else if (c.dataset == DatasetType::Cities) {
      c.slot_policy = Filler{"place"};
    }
    if (root.contains("labels")) c.labels = root["labels"].get<std::vector<std::string>>();
    if (!root.contains("metrics") || !root["metrics"].is_array() || root["metrics"].empty()) {
      invalid("task file: 'metrics' must be a non-empty array");
    }
    for (const auto& m : root["metrics"]) {
      if (m.is_string()) {
        c.metrics.push_back(MetricSpec::parse(m.get<std::string>()));
      } else {
        c.metrics.push_back(MetricSpec::parse(get_string(m, "name"), m.value("label", std::string{})));
      }
    }
    if (root.contains("filter_providers")) {
      c.filter_providers = root["filter_providers"].get<std::vector<std::string>>();
    }
    if (root.contains("bootstrap")) {
      const auto& b = root["bootstrap"];
      BootstrapOptions opt;
      opt.n_boot = b.value("n", opt.n_boot);
      opt.level = b.value("level", opt.level);
      opt.seed = b.value("seed", opt.seed);
      c.bootstrap = opt;
    }
  } catch (const json::exception& e) {
    invalid("task file " + path.string() + ": " + e.what());
  }
  return c;
}

BuiltTask build_task(const TaskConfig& c, ProviderList providers) {
  BuiltTask out;
  TaskSpec& spec = out.spec;
  spec.name = c.name;
  spec.method = c.method;
  spec.metrics = c.metrics;

  switch (c.dataset) {
    case DatasetType::Concreteness: {
      auto data = load_concreteness(c.dataset_path);
      out.load_report = data.report;
      spec.kind = TaskKind::Regression;
      spec.prompts = load_prompts(c);
      for (auto& r : data.records) {
        TaskItem item;
        item.id = r.word;
        item.word = r.word;
        item.golds = {r.word};
        item.target = r.score;
        spec.items.push_back(std::move(item));
      }
      break;
    }
    case DatasetType::Color: {
      auto data = load_color(c.dataset_path, parse_color_dataset(c.variant.value_or("ctd")));
      out.load_report = data.report;
      spec.kind = TaskKind::Categorical;
      spec.prompts = load_prompts(c);
      auto all = default_labels(c);
      spec.labels = CandidateSet(single_token_filter(all, providers));
      for (auto& r : data.records) {
        TaskItem item;
        item.id = r.word;
        item.word = r.word;
        for (auto& col : r.colors) {
          if (spec.labels->index_of(col)) item.golds.push_back(col);
        }
        if (item.golds.empty()) {
          // Every gold color failed the single-token rule.
          --out.load_report.kept;
          out.load_report.drop("gold_not_single_token");
          continue;
        }
        spec.items.push_back(std::move(item));
      }
      break;
    }
    case DatasetType::ShapeIt: {
      auto data = load_shapeit(c.dataset_path);
      out.load_report = data.report;
      spec.kind = TaskKind::Categorical;
      spec.prompts = load_prompts(c);
      spec.labels = CandidateSet(default_labels(c));
      for (auto& r : data.records) {
        TaskItem item;
        item.id = r.phrase;
        item.word = r.phrase;
        item.golds = {r.shape};
        spec.items.push_back(std::move(item));
      }
      break;
    }
    case DatasetType::Cities: {
      auto data = load_cities(c.dataset_path, providers);
      out.load_report = data.report;
      spec.kind = TaskKind::Retrieval;
      spec.item_policy = c.slot_policy;
      spec.equivalence = cities_equivalence();
      for (std::size_t i = 0; i < data.records.size(); ++i) {
        auto& q = data.records[i];
        TaskItem item;
        item.id = "q" + std::to_string(i);
        item.text = q.text;
        item.candidates = q.candidate_pool;
        item.golds = {q.answer};
        spec.items.push_back(std::move(item));
      }
      break;
    }
    case DatasetType::Cbt: {
      auto data = load_cbt(c.dataset_path, providers);
      out.load_report = data.report;
      spec.kind = TaskKind::Categorical;
      spec.item_policy = c.slot_policy;
      for (std::size_t i = 0; i < data.records.size(); ++i) {
        auto& r = data.records[i];
        if (c.variant && r.pos_group != *c.variant) {
          --out.load_report.kept;
          out.load_report.drop("other_pos_group");
          continue;
        }
        TaskItem item;
        item.id = "s" + std::to_string(i);
        item.text = r.sentence;
        item.candidates = r.candidates;
        item.golds = {r.answer};
        spec.items.push_back(std::move(item));
      }
      break;
    }
    case DatasetType::Imdb: {
      auto data = load_imdb(c.dataset_path, c.seed, providers);
      out.load_report = data.report;
      spec.kind = TaskKind::Binary;
      spec.prompts = load_prompts(c);
      spec.labels = CandidateSet(default_labels(c));
      for (auto& r : data.records) {
        TaskItem item;
        item.id = r.review_id;
        item.review = r.sentence;
        item.golds = {r.label};
        spec.items.push_back(std::move(item));
      }
      break;
    }
  }
  spec.validate();
  return out;
}

}  // namespace vlu
