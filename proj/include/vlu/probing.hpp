// SPDX-License-Identifier: Apache-2.0
//
// Zero-shot probing engine: Stroop probing (cosine similarity between the
// pooled embeddings of a masked prompt and each completed prompt), MLM
// probing (candidate log-probabilities at the mask), and aggregation of
// per-prompt metrics over a prompt ensemble.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlu/metrics.hpp"
#include "vlu/prompt.hpp"
#include "vlu/provider.hpp"

namespace vlu {

enum class ProbeMethod { Stroop, Mlm };
enum class TaskKind { Regression, Categorical, Retrieval, Binary };

std::string_view to_string(ProbeMethod method) noexcept;
std::string_view to_string(TaskKind kind) noexcept;
/// "SP"/"stroop" and "MLM"/"mlm". ValidationError otherwise.
ProbeMethod parse_probe_method(std::string_view text);
TaskKind parse_task_kind(std::string_view text);

/// items x candidates scores from one prompt. Rows may carry their own
/// candidate set (per-item tasks) as long as every row has the same width.
class ScoreTable {
 public:
  /// One shared candidate set.
  ScoreTable(ProbeMethod method, std::vector<std::string> items, CandidateSet candidates, std::vector<double> scores);
  /// One candidate set per row.
  ScoreTable(ProbeMethod method, std::vector<std::string> items, std::vector<CandidateSet> row_candidates,
             std::vector<double> scores);

  ProbeMethod method() const noexcept { return method_; }
  const std::vector<std::string>& items() const noexcept { return items_; }
  std::size_t rows() const noexcept { return items_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t row, std::size_t col) const { return scores_[row * cols_ + col]; }
  std::span<const double> row(std::size_t r) const { return {scores_.data() + r * cols_, cols_}; }
  const CandidateSet& candidates(std::size_t row) const {
    return candidate_sets_.size() == 1 ? candidate_sets_.front() : candidate_sets_[row];
  }

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

 private:
  void validate() const;

  ProbeMethod method_;
  std::vector<std::string> items_;
  std::vector<CandidateSet> candidate_sets_;
  std::size_t cols_ = 0;
  std::vector<double> scores_;
};

/// Unit-normalized dot product of each completion embedding with the masked
/// embedding. ZeroVector when any norm is below 1e-12.
std::vector<double> cosine_scores(const EmbeddingVector& masked, std::span<const EmbeddingVector> completed);

/// Stroop probing for one masked text and its completions.
std::vector<double> stroop_scores(ModelProvider& provider, const std::string& masked_text,
                                  std::span<const std::string> completed_texts);

/// Memoizes token counts so candidate single-token checks hit the provider
/// once per distinct string.
class TokenCountCache {
 public:
  std::size_t count(ModelProvider& provider, const std::string& text);

 private:
  std::map<std::string, std::size_t, std::less<>> counts_;
};

/// MLM probing: log-probabilities of each candidate at the mask.
/// MaskUnavailable, InvalidArgument (mask count != 1), MultiTokenCandidate.
std::vector<double> mlm_scores(ModelProvider& provider, const std::string& masked_text,
                               const CandidateSet& candidates, TokenCountCache* cache = nullptr);

/// Index of the maximum; ties go to the lowest index. EmptyRow.
std::size_t predict_categorical(std::span<const double> row);
/// Stable descending order of indices. EmptyRow.
std::vector<std::size_t> rank_candidates(std::span<const double> row);

struct MetricReport {
  std::string metric;
  /// prompt id -> value, in prompt order.
  std::vector<std::pair<std::string, double>> per_prompt;
  double max = 0.0;
  double mean = 0.0;
  /// Unbiased sample std across prompts; 0 for a single prompt.
  double std = 0.0;
  std::string best_prompt;
  std::optional<Interval> ci;
  double ci_level = 0.0;

  static MetricReport aggregate(std::string metric, std::vector<std::pair<std::string, double>> per_prompt);
};

enum class MetricKind { Pearson, Spearman, Kendall, AbsPearson, AbsSpearman, AbsKendall, Accuracy, RecallAtK };

struct MetricSpec {
  std::string label;
  MetricKind kind = MetricKind::Accuracy;
  std::size_t k = 1;

  /// pearson | spearman | kendall | abs_pearson | abs_spearman |
  /// abs_kendall | accuracy | recall@K
  static MetricSpec parse(std::string_view name, std::string label = {});
  std::string name() const;
};

struct TaskItem {
  std::string id;
  /// Fills `<w>` (and the slot, for regression).
  std::optional<std::string> word;
  /// Fills `<s>`.
  std::optional<std::string> review;
  /// Item-specific template body (cloze tasks).
  std::optional<std::string> text;
  /// Item-specific candidates (cloze tasks); labels are the candidates.
  std::optional<CandidateSet> candidates;
  LabelSet golds;
  double target = 0.0;
};

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::Categorical;
  ProbeMethod method = ProbeMethod::Stroop;
  /// Empty when every item carries its own template.
  std::vector<PromptTemplate> prompts;
  /// Slot policy for item-specific templates.
  SlotPolicy item_policy = RemoveSlot{};
  /// Canonical labels for global-candidate tasks. Per-prompt surface forms
  /// are index-aligned with these.
  std::optional<CandidateSet> labels;
  std::vector<TaskItem> items;
  std::vector<MetricSpec> metrics;
  std::vector<LabelSet> equivalence;

  bool per_item_prompt() const noexcept { return prompts.empty(); }
  /// ValidationError on inconsistent specs.
  void validate() const;
};

struct BootstrapOptions {
  std::size_t n_boot = 200;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct RunOptions {
  std::size_t batch_items = 32;
  std::optional<BootstrapOptions> bootstrap;
};

struct PromptRun {
  std::string prompt_id;
  std::string prompt;
  ScoreTable table;
  /// Position in TaskSpec::items of each table row.
  std::vector<std::size_t> item_index;
  std::size_t skipped = 0;
};

struct TaskResult {
  std::vector<PromptRun> prompts;
  std::vector<MetricReport> metrics;
};

/// Scores every (prompt, item) pair and aggregates metrics over prompts.
/// Work is spread over `providers` (one worker per provider); results do not
/// depend on the worker count. Items failing with item-level errors are
/// skipped; PromptFailure when a prompt loses every item.
TaskResult run_task(const TaskSpec& spec, std::span<ModelProvider* const> providers, const RunOptions& options = {});
TaskResult run_task(const TaskSpec& spec, ModelProvider& provider, const RunOptions& options = {});

/// Metric value of one prompt's table, optionally over a resample of rows.
/// An empty `rows` means every row.
double evaluate_metric(const TaskSpec& spec, const MetricSpec& metric, const PromptRun& run,
                       std::span<const std::size_t> rows = {});

/// JSONL rows {item, candidate, score, prompt_id, method}.
void write_score_rows(std::ostream& out, const PromptRun& run);

}  // namespace vlu
