// SPDX-License-Identifier: Apache-2.0
#include "vlu/probing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "vlu/error.hpp"

namespace vlu {

std::string_view to_string(ProbeMethod method) noexcept { return method == ProbeMethod::Stroop ? "SP" : "MLM"; }

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::Regression: return "regression";
    case TaskKind::Categorical: return "categorical";
    case TaskKind::Retrieval: return "retrieval";
    case TaskKind::Binary: return "binary";
  }
  return "categorical";
}

ProbeMethod parse_probe_method(std::string_view text) {
  if (text == "SP" || text == "sp" || text == "stroop") return ProbeMethod::Stroop;
  if (text == "MLM" || text == "mlm") return ProbeMethod::Mlm;
  throw Error(Errc::ValidationError, "unknown probing method '" + std::string(text) + "'");
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "regression") return TaskKind::Regression;
  if (text == "categorical") return TaskKind::Categorical;
  if (text == "retrieval") return TaskKind::Retrieval;
  if (text == "binary") return TaskKind::Binary;
  throw Error(Errc::ValidationError, "unknown task kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ScoreTable

ScoreTable::ScoreTable(ProbeMethod method, std::vector<std::string> items, CandidateSet candidates,
                       std::vector<double> scores)
    : method_(method), items_(std::move(items)), cols_(candidates.size()), scores_(std::move(scores)) {
  candidate_sets_.push_back(std::move(candidates));
  validate();
}

ScoreTable::ScoreTable(ProbeMethod method, std::vector<std::string> items, std::vector<CandidateSet> row_candidates,
                       std::vector<double> scores)
    : method_(method), items_(std::move(items)), candidate_sets_(std::move(row_candidates)), scores_(std::move(scores)) {
  if (candidate_sets_.size() != items_.size()) {
    throw Error(Errc::DimMismatch, "one candidate set per row required");
  }
  cols_ = candidate_sets_.empty() ? 0 : candidate_sets_.front().size();
  for (const auto& c : candidate_sets_) {
    if (c.size() != cols_) throw Error(Errc::DimMismatch, "rows have differing candidate counts");
  }
  validate();
}

void ScoreTable::validate() const {
  if (scores_.size() != items_.size() * cols_) throw Error(Errc::DimMismatch, "score matrix size mismatch");
  for (const double s : scores_) {
    if (!std::isfinite(s)) throw Error(Errc::InvalidArgument, "non-finite score");
    if (method_ == ProbeMethod::Stroop && (s < -1.0 - 1e-6 || s > 1.0 + 1e-6)) {
      throw Error(Errc::InvalidArgument, "cosine score outside [-1, 1]");
    }
  }
}

// ---------------------------------------------------------------------------
// Scoring primitives

std::vector<double> cosine_scores(const EmbeddingVector& masked, std::span<const EmbeddingVector> completed) {
  auto norm = [](const EmbeddingVector& v) {
    double s = 0.0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double nm = norm(masked);
  if (nm < 1e-12) throw Error(Errc::ZeroVector, "masked embedding has zero norm");
  std::vector<double> out;
  out.reserve(completed.size());
  for (std::size_t i = 0; i < completed.size(); ++i) {
    const auto& v = completed[i];
    if (v.size() != masked.size()) throw Error(Errc::DimMismatch, "embedding dimensions differ");
    const double nc = norm(v);
    if (nc < 1e-12) throw Error(Errc::ZeroVector, "completed embedding has zero norm", i);
    double dot = 0.0;
    for (std::size_t d = 0; d < v.size(); ++d) dot += (masked[d] / nm) * (v[d] / nc);
    out.push_back(std::clamp(dot, -1.0, 1.0));
  }
  return out;
}

std::vector<double> stroop_scores(ModelProvider& provider, const std::string& masked_text,
                                  std::span<const std::string> completed_texts) {
  if (masked_text.empty()) throw Error(Errc::EmptyText, "masked text is empty");
  std::vector<std::string> batch;
  batch.reserve(completed_texts.size() + 1);
  batch.push_back(masked_text);
  for (std::size_t i = 0; i < completed_texts.size(); ++i) {
    if (completed_texts[i].empty()) throw Error(Errc::EmptyText, "completed text is empty", i);
    batch.push_back(completed_texts[i]);
  }
  const auto vectors = provider.embed(batch);
  return cosine_scores(vectors.front(), std::span(vectors).subspan(1));
}

std::size_t TokenCountCache::count(ModelProvider& provider, const std::string& text) {
  if (auto it = counts_.find(text); it != counts_.end()) return it->second;
  const auto n = provider.token_count(text);
  counts_.emplace(text, n);
  return n;
}

std::vector<double> mlm_scores(ModelProvider& provider, const std::string& masked_text,
                               const CandidateSet& candidates, TokenCountCache* cache) {
  const auto info = provider.info();
  if (!info.has_mask_token) throw Error(Errc::MaskUnavailable, "provider '" + info.name + "' has no mask token");
  std::size_t masks = 0;
  for (auto pos = masked_text.find(*info.mask_token); pos != std::string::npos;
       pos = masked_text.find(*info.mask_token, pos + info.mask_token->size())) {
    ++masks;
  }
  if (masks != 1) throw Error(Errc::InvalidArgument, "masked text must contain exactly one mask token");
  TokenCountCache local;
  TokenCountCache& tokens = cache ? *cache : local;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (tokens.count(provider, candidates[i]) != 1) {
      throw Error(Errc::MultiTokenCandidate, "candidate '" + candidates[i] + "' is not a single token", i);
    }
  }
  return provider.mlm_logprobs(masked_text, candidates.values());
}

std::size_t predict_categorical(std::span<const double> row) {
  if (row.empty()) throw Error(Errc::EmptyRow, "cannot predict from an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> rank_candidates(std::span<const double> row) {
  if (row.empty()) throw Error(Errc::EmptyRow, "cannot rank an empty row");
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

// ---------------------------------------------------------------------------
// Metrics

MetricReport MetricReport::aggregate(std::string metric, std::vector<std::pair<std::string, double>> per_prompt) {
  if (per_prompt.empty()) throw Error(Errc::EmptyList, "no per-prompt values to aggregate");
  MetricReport r;
  r.metric = std::move(metric);
  r.per_prompt = std::move(per_prompt);
  auto best = r.per_prompt.begin();
  double sum = 0.0;
  for (auto it = r.per_prompt.begin(); it != r.per_prompt.end(); ++it) {
    if (it->second > best->second) best = it;
    sum += it->second;
  }
  const double n = static_cast<double>(r.per_prompt.size());
  r.max = best->second;
  r.best_prompt = best->first;
  r.mean = sum / n;
  if (r.per_prompt.size() > 1) {
    double ss = 0.0;
    for (const auto& [id, v] : r.per_prompt) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

MetricSpec MetricSpec::parse(std::string_view name, std::string label) {
  MetricSpec m;
  m.label = label.empty() ? std::string(name) : std::move(label);
  if (name == "pearson") m.kind = MetricKind::Pearson;
  else if (name == "spearman") m.kind = MetricKind::Spearman;
  else if (name == "kendall") m.kind = MetricKind::Kendall;
  else if (name == "abs_pearson") m.kind = MetricKind::AbsPearson;
  else if (name == "abs_spearman") m.kind = MetricKind::AbsSpearman;
  else if (name == "abs_kendall") m.kind = MetricKind::AbsKendall;
  else if (name == "accuracy") m.kind = MetricKind::Accuracy;
  else if (name.starts_with("recall@")) {
    m.kind = MetricKind::RecallAtK;
    try {
      m.k = std::stoul(std::string(name.substr(7)));
    } catch (const std::exception&) {
      throw Error(Errc::ValidationError, "bad recall metric '" + std::string(name) + "'");
    }
    if (m.k < 1) throw Error(Errc::ValidationError, "recall@k needs k >= 1");
  } else {
    throw Error(Errc::ValidationError, "unknown metric '" + std::string(name) + "'");
  }
  return m;
}

std::string MetricSpec::name() const {
  switch (kind) {
    case MetricKind::Pearson: return "pearson";
    case MetricKind::Spearman: return "spearman";
    case MetricKind::Kendall: return "kendall";
    case MetricKind::AbsPearson: return "abs_pearson";
    case MetricKind::AbsSpearman: return "abs_spearman";
    case MetricKind::AbsKendall: return "abs_kendall";
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::RecallAtK: return "recall@" + std::to_string(k);
  }
  return "accuracy";
}

namespace {

bool is_correlation(MetricKind k) {
  return k != MetricKind::Accuracy && k != MetricKind::RecallAtK;
}

const std::string& label_for(const TaskSpec& spec, const TaskItem& item, std::size_t index) {
  return item.candidates ? (*item.candidates)[index] : (*spec.labels)[index];
}

}  // namespace

void TaskSpec::validate() const {
  auto fail = [&](const std::string& why) { throw Error(Errc::ValidationError, "task '" + name + "': " + why); };
  if (items.empty()) fail("no items");
  if (metrics.empty()) fail("no metrics");
  for (const auto& p : prompts) {
    if (kind != TaskKind::Regression && labels && p.candidates() && p.candidates()->size() != labels->size()) {
      fail("prompt candidates not aligned with labels: '" + p.body() + "'");
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (per_item_prompt()) {
      if (!item.text) fail("item " + item.id + " lacks a template text");
      PromptTemplate check(*item.text, item_policy);
    }
    if (kind == TaskKind::Regression) {
      if (!item.word) fail("regression item " + item.id + " lacks a word");
      if (!std::isfinite(item.target)) fail("regression item " + item.id + " has a non-finite target");
      continue;
    }
    if (kind == TaskKind::Retrieval && !item.candidates) fail("retrieval requires per-item candidate sets");
    if (!item.candidates && !labels) fail("item " + item.id + " has no candidates and the task has no labels");
    if (item.golds.empty()) fail("item " + item.id + " has no gold label");
  }
  if (kind == TaskKind::Regression) {
    if (method != ProbeMethod::Stroop) fail("regression requires Stroop probing");
    for (const auto& m : metrics) {
      if (!is_correlation(m.kind)) fail("metric " + m.label + " not valid for regression");
    }
  } else {
    for (const auto& m : metrics) {
      if (is_correlation(m.kind)) fail("metric " + m.label + " requires a regression task");
    }
  }
  if (kind == TaskKind::Binary && labels && labels->size() != 2) fail("binary tasks need exactly two labels");
}

double evaluate_metric(const TaskSpec& spec, const MetricSpec& metric, const PromptRun& run,
                       std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(run.table.rows());
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  const auto& table = run.table;
  if (is_correlation(metric.kind)) {
    std::vector<double> xs, ys;
    xs.reserve(rows.size());
    ys.reserve(rows.size());
    for (const auto r : rows) {
      xs.push_back(table.at(r, 0));
      ys.push_back(spec.items[run.item_index[r]].target);
    }
    switch (metric.kind) {
      case MetricKind::Pearson: return pearson(xs, ys);
      case MetricKind::Spearman: return spearman(xs, ys);
      case MetricKind::Kendall: return kendall_tau_b(xs, ys);
      case MetricKind::AbsPearson: return std::abs(pearson(xs, ys));
      case MetricKind::AbsSpearman: return std::abs(spearman(xs, ys));
      default: return std::abs(kendall_tau_b(xs, ys));
    }
  }
  if (metric.kind == MetricKind::Accuracy) {
    std::vector<Label> predictions;
    std::vector<LabelSet> golds;
    for (const auto r : rows) {
      const auto& item = spec.items[run.item_index[r]];
      predictions.push_back(label_for(spec, item, predict_categorical(table.row(r))));
      golds.push_back(item.golds);
    }
    return accuracy(predictions, golds);
  }
  std::vector<std::vector<Label>> rankings;
  std::vector<Label> golds;
  for (const auto r : rows) {
    const auto& item = spec.items[run.item_index[r]];
    std::vector<Label> ranked;
    for (const auto c : rank_candidates(table.row(r))) ranked.push_back(label_for(spec, item, c));
    rankings.push_back(std::move(ranked));
    golds.push_back(item.golds.front());
  }
  return recall_at_k(rankings, golds, metric.k, spec.equivalence);
}

// ---------------------------------------------------------------------------
// Task runner

namespace {

struct Unit {
  std::size_t prompt;
  std::size_t begin;
  std::size_t end;
};

using RowScores = std::optional<std::vector<double>>;

class Scorer {
 public:
  Scorer(const TaskSpec& spec, const std::vector<CandidateSet>& surfaces, ModelProvider& provider)
      : spec_(spec), surfaces_(surfaces), provider_(provider), info_(provider.info()) {}

  std::vector<RowScores> score(const Unit& unit) {
    return spec_.method == ProbeMethod::Stroop ? score_stroop(unit) : score_mlm(unit);
  }

 private:
  struct Texts {
    std::string masked;
    std::vector<std::string> completed;
  };

  PromptTemplate prompt_for(std::size_t prompt, const TaskItem& item) const {
    if (spec_.per_item_prompt()) return PromptTemplate(*item.text, spec_.item_policy);
    return spec_.prompts[prompt];
  }

  const CandidateSet& candidates_for(std::size_t prompt, const TaskItem& item) const {
    if (item.candidates) return *item.candidates;
    return surfaces_[prompt];
  }

  RenderArgs base_args(const TaskItem& item) const {
    RenderArgs args;
    args.item = item.word;
    args.review = item.review;
    args.mask_token = info_.mask_token;
    return args;
  }

  Texts texts_for(std::size_t prompt, const TaskItem& item) const {
    const auto tmpl = prompt_for(prompt, item);
    auto args = base_args(item);
    Texts t;
    t.masked = render(tmpl, args);
    if (spec_.kind == TaskKind::Regression) {
      args.slot_value = item.word;
      t.completed.push_back(render(tmpl, args));
      return t;
    }
    for (const auto& c : candidates_for(prompt, item).values()) {
      args.slot_value = c;
      t.completed.push_back(render(tmpl, args));
    }
    return t;
  }

  std::vector<double> scores_from(const Texts& t, const std::unordered_map<std::string, EmbeddingVector>& vecs) {
    std::vector<EmbeddingVector> completed;
    completed.reserve(t.completed.size());
    for (const auto& c : t.completed) completed.push_back(vecs.at(c));
    return cosine_scores(vecs.at(t.masked), completed);
  }

  void embed_into(const std::vector<std::string>& texts, std::unordered_map<std::string, EmbeddingVector>& vecs) {
    std::vector<std::string> missing;
    for (const auto& t : texts) {
      if (!vecs.contains(t) && std::find(missing.begin(), missing.end(), t) == missing.end()) missing.push_back(t);
    }
    if (missing.empty()) return;
    auto out = provider_.embed(missing);
    for (std::size_t i = 0; i < missing.size(); ++i) vecs.emplace(missing[i], std::move(out[i]));
  }

  std::vector<RowScores> score_stroop(const Unit& unit) {
    std::vector<RowScores> rows(unit.end - unit.begin);
    std::vector<std::optional<Texts>> texts(rows.size());
    std::vector<std::string> batch;
    for (std::size_t i = unit.begin; i < unit.end; ++i) {
      try {
        texts[i - unit.begin] = texts_for(unit.prompt, spec_.items[i]);
      } catch (const Error& e) {
        if (!is_item_level(e.code())) throw;
        continue;
      }
      const auto& t = *texts[i - unit.begin];
      batch.push_back(t.masked);
      batch.insert(batch.end(), t.completed.begin(), t.completed.end());
    }
    std::unordered_map<std::string, EmbeddingVector> vecs;
    bool batched = true;
    try {
      embed_into(batch, vecs);
    } catch (const Error& e) {
      if (!is_item_level(e.code())) throw;
      batched = false;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!texts[r]) continue;
      try {
        if (!batched) {
          std::vector<std::string> own{texts[r]->masked};
          own.insert(own.end(), texts[r]->completed.begin(), texts[r]->completed.end());
          embed_into(own, vecs);
        }
        rows[r] = scores_from(*texts[r], vecs);
      } catch (const Error& e) {
        if (!is_item_level(e.code())) throw;
      }
    }
    return rows;
  }

  std::vector<RowScores> score_mlm(const Unit& unit) {
    std::vector<RowScores> rows(unit.end - unit.begin);
    for (std::size_t i = unit.begin; i < unit.end; ++i) {
      const auto& item = spec_.items[i];
      try {
        const auto tmpl = prompt_for(unit.prompt, item).with_policy(ProviderMask{});
        const auto masked = render(tmpl, base_args(item));
        rows[i - unit.begin] = mlm_scores(provider_, masked, candidates_for(unit.prompt, item), &tokens_);
      } catch (const Error& e) {
        if (!is_item_level(e.code())) throw;
      }
    }
    return rows;
  }

  const TaskSpec& spec_;
  const std::vector<CandidateSet>& surfaces_;
  ModelProvider& provider_;
  ProviderInfo info_;
  TokenCountCache tokens_;
};

std::vector<CandidateSet> surface_candidates(const TaskSpec& spec) {
  std::vector<CandidateSet> out;
  for (const auto& p : spec.prompts) {
    if (spec.kind == TaskKind::Regression || !spec.labels) {
      out.emplace_back();
    } else if (p.candidates()) {
      out.push_back(*p.candidates());
    } else if (p.candidate_form() == CandidateForm::Adjective) {
      std::vector<std::string> adj;
      for (const auto& l : spec.labels->values()) adj.push_back(shape_adjective(l));
      out.emplace_back(std::move(adj));
    } else {
      out.push_back(*spec.labels);
    }
  }
  if (out.empty()) out.emplace_back();
  return out;
}

}  // namespace

TaskResult run_task(const TaskSpec& spec, std::span<ModelProvider* const> providers, const RunOptions& options) {
  spec.validate();
  if (providers.empty()) throw Error(Errc::InvalidArgument, "run_task needs at least one provider");
  const auto surfaces = surface_candidates(spec);
  const std::size_t n_prompts = spec.per_item_prompt() ? 1 : spec.prompts.size();
  const std::size_t chunk = std::max<std::size_t>(1, options.batch_items);

  std::vector<Unit> units;
  for (std::size_t p = 0; p < n_prompts; ++p) {
    for (std::size_t b = 0; b < spec.items.size(); b += chunk) {
      units.push_back(Unit{p, b, std::min(b + chunk, spec.items.size())});
    }
  }
  std::vector<std::vector<RowScores>> unit_rows(units.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::size_t error_unit = units.size();
  std::exception_ptr error;

  auto work = [&](ModelProvider* provider) {
    try {
      Scorer scorer(spec, surfaces, *provider);
      for (std::size_t u = next++; u < units.size() && !stop; u = next++) {
        try {
          unit_rows[u] = scorer.score(units[u]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (u < error_unit) {
            error_unit = u;
            error = std::current_exception();
          }
          stop = true;
        }
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      stop = true;
    }
  };

  if (providers.size() == 1) {
    work(providers.front());
  } else {
    std::vector<std::jthread> workers;
    for (auto* provider : providers) workers.emplace_back(work, provider);
  }
  if (error) std::rethrow_exception(error);

  TaskResult result;
  std::size_t u = 0;
  for (std::size_t p = 0; p < n_prompts; ++p) {
    std::vector<std::string> ids;
    std::vector<std::size_t> index;
    std::vector<CandidateSet> row_sets;
    std::vector<double> scores;
    for (; u < units.size() && units[u].prompt == p; ++u) {
      for (std::size_t r = 0; r < unit_rows[u].size(); ++r) {
        const auto& row = unit_rows[u][r];
        if (!row) continue;
        const std::size_t item = units[u].begin + r;
        ids.push_back(spec.items[item].id);
        index.push_back(item);
        if (spec.items[item].candidates) row_sets.push_back(*spec.items[item].candidates);
        scores.insert(scores.end(), row->begin(), row->end());
      }
    }
    const std::string prompt_id = spec.per_item_prompt() ? "item" : "p" + std::to_string(p);
    if (ids.empty()) throw Error(Errc::PromptFailure, "prompt " + prompt_id + " failed for every item", p);
    const std::size_t skipped = spec.items.size() - ids.size();
    const std::string body = spec.per_item_prompt() ? "<item>" : spec.prompts[p].body();
    CandidateSet columns = spec.kind == TaskKind::Regression ? CandidateSet({"score"}) : surfaces[p];
    if (!row_sets.empty() && row_sets.size() == ids.size()) {
      result.prompts.push_back(PromptRun{prompt_id, body,
                                         ScoreTable(spec.method, std::move(ids), std::move(row_sets), std::move(scores)),
                                         std::move(index), skipped});
    } else {
      result.prompts.push_back(PromptRun{prompt_id, body,
                                         ScoreTable(spec.method, std::move(ids), std::move(columns), std::move(scores)),
                                         std::move(index), skipped});
    }
  }

  for (const auto& metric : spec.metrics) {
    std::vector<std::pair<std::string, double>> per_prompt;
    for (const auto& run : result.prompts) per_prompt.emplace_back(run.prompt_id, evaluate_metric(spec, metric, run));
    auto report = MetricReport::aggregate(metric.label, std::move(per_prompt));
    if (options.bootstrap) {
      const auto& best = *std::find_if(result.prompts.begin(), result.prompts.end(),
                                       [&](const PromptRun& r) { return r.prompt_id == report.best_prompt; });
      report.ci = bootstrap_ci(
          [&](std::span<const std::size_t> idx) { return evaluate_metric(spec, metric, best, idx); },
          best.table.rows(), options.bootstrap->n_boot, options.bootstrap->level, options.bootstrap->seed);
      report.ci_level = options.bootstrap->level;
    }
    result.metrics.push_back(std::move(report));
  }
  return result;
}

TaskResult run_task(const TaskSpec& spec, ModelProvider& provider, const RunOptions& options) {
  ModelProvider* one[] = {&provider};
  return run_task(spec, std::span<ModelProvider* const>(one), options);
}

void write_score_rows(std::ostream& out, const PromptRun& run) {
  const auto& t = run.table;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      nlohmann::ordered_json row;
      row["item"] = t.items()[r];
      row["candidate"] = t.candidates(r)[c];
      row["score"] = t.at(r, c);
      row["prompt_id"] = run.prompt_id;
      row["method"] = to_string(t.method());
      out << row.dump() << '\n';
    }
  }
}

}  // namespace vlu
