// SPDX-License-Identifier: Apache-2.0
//
// vluprobe: run probing tasks, count color bigrams, generate groundability
// data, fit linear probes and serve or check providers over NDJSON.
//
// Exit codes: 0 success, 2 invalid input, 3 provider failure, 1 otherwise.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vlu/datasets.hpp"
#include "vlu/embedding_cache.hpp"
#include "vlu/error.hpp"
#include "vlu/groundability.hpp"
#include "vlu/linear_probe.hpp"
#include "vlu/probing.hpp"
#include "vlu/protocol.hpp"
#include "vlu/provider_spec.hpp"
#include "vlu/reporting_bias.hpp"
#include "vlu/results.hpp"
#include "vlu/task_file.hpp"

namespace {

using vlu::Errc;
using vlu::Error;
using OJson = nlohmann::ordered_json;

constexpr int kExitInvalid = 2;
constexpr int kExitProvider = 3;

void diagnose(const std::string& level, const std::string& code, const std::string& message,
              std::optional<std::size_t> index = std::nullopt) {
  OJson j;
  j["level"] = level;
  j["code"] = code;
  j["message"] = message;
  if (index) j["index"] = *index;
  std::cerr << j.dump() << '\n';
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ProviderError:
    case Errc::ProtocolError:
    case Errc::PromptFailure:
      return kExitProvider;
    default:
      return kExitInvalid;
  }
}

struct Providers {
  std::vector<std::unique_ptr<vlu::ModelProvider>> owned;
  std::vector<vlu::ModelProvider*> ptrs;

  void open(const vlu::ProviderSpec& spec, unsigned count) {
    for (unsigned i = 0; i < count; ++i) {
      owned.push_back(spec.open());
      ptrs.push_back(owned.back().get());
    }
  }
};

// Writes to `path`, or stdout when empty.
template <typename Fn>
void write_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write " + path);
  fn(os);
  if (!os) throw Error(Errc::IoError, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string task;
  std::string provider = "mock";
  std::string out;
  std::string markdown;
  std::string scores;
  unsigned jobs = 1;
  std::size_t batch = 32;
  std::optional<std::size_t> bootstrap;
  std::uint64_t bootstrap_seed = 0;
};

int cmd_run(const RunArgs& a) {
  const auto config = vlu::parse_task_config(a.task);
  const auto spec = vlu::ProviderSpec::parse(a.provider);
  Providers run;
  run.open(spec, a.jobs);

  Providers filters;
  for (const auto& text : config.filter_providers) filters.open(vlu::ProviderSpec::parse(text), 1);
  std::span<vlu::ModelProvider* const> filter_list =
      config.filter_providers.empty() ? std::span<vlu::ModelProvider* const>(run.ptrs.data(), 1)
                                      : std::span<vlu::ModelProvider* const>(filters.ptrs);

  auto built = vlu::build_task(config, filter_list);

  vlu::RunOptions options;
  options.batch_items = a.batch;
  options.bootstrap = config.bootstrap;
  if (a.bootstrap) {
    vlu::BootstrapOptions b;
    b.n_boot = *a.bootstrap;
    b.seed = a.bootstrap_seed;
    options.bootstrap = b;
  }
  auto result = vlu::run_task(built.spec, run.ptrs, options);
  for (const auto& p : result.prompts) {
    if (p.skipped > 0) {
      diagnose("warning", "SkippedItems", "prompt " + p.prompt_id + " skipped " + std::to_string(p.skipped) + " items");
    }
  }

  if (!a.scores.empty()) {
    write_output(a.scores, [&](std::ostream& os) {
      for (const auto& p : result.prompts) vlu::write_score_rows(os, p);
    });
  }
  vlu::TaskSummary summary{config.name,
                           spec.text,
                           std::string(vlu::to_string(config.method)),
                           std::string(vlu::to_string(built.spec.kind)),
                           built.spec.items.size(),
                           built.load_report,
                           std::move(result)};
  const auto json = vlu::results_json(summary, config.metrics);
  write_output(a.out, [&](std::ostream& os) { os << json.dump(2) << '\n'; });
  if (!a.markdown.empty()) {
    write_output(a.markdown, [&](std::ostream& os) { vlu::write_markdown(os, std::span(&json, 1)); });
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bias

struct BiasArgs {
  std::string corpus;
  std::string colors;
  std::string targets;
  std::string golds;
  std::string golds_dataset = "ctd";
  unsigned shards = 1;
  std::string out;
};

int cmd_bias(const BiasArgs& a) {
  const auto colors = vlu::read_word_list(a.colors);
  const auto targets = vlu::read_word_list(a.targets);
  const auto counts = vlu::count_file(a.corpus, colors, targets, a.shards);
  write_output(a.out, [&](std::ostream& os) { counts.write_tsv(os); });
  if (!a.golds.empty()) {
    const auto golds = vlu::load_color(a.golds, vlu::parse_color_dataset(a.golds_dataset));
    const auto eval = vlu::evaluate_bias(counts, golds.records);
    for (const auto& w : eval.no_evidence) diagnose("warning", "NoColorEvidence", "no color evidence for '" + w + "'");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", eval.accuracy);
    // Stays off stdout when the counts go there.
    auto& os = a.out.empty() ? std::cerr : std::cout;
    os << "accuracy\t" << buf << '\t' << eval.correct << '/' << eval.evaluated << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// groundgen

struct GroundgenArgs {
  std::string verbs;
  std::string nouns;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double percentile = vlu::kDefaultNllPercentile;
  std::string provider = "mock";
  unsigned jobs = 1;
  std::string out;
};

int cmd_groundgen(const GroundgenArgs& a) {
  const auto verbs = vlu::read_word_list(a.verbs);
  const auto nouns = vlu::read_word_list(a.nouns);
  Providers providers;
  providers.open(vlu::ProviderSpec::parse(a.provider), a.jobs);
  vlu::GroundgenOptions options{a.n, a.seed, a.percentile};
  const auto rows = vlu::run_groundgen(verbs, nouns, options, providers.ptrs);
  write_output(a.out, [&](std::ostream& os) { vlu::write_labeled(os, rows); });
  return 0;
}

// ---------------------------------------------------------------------------
// linprobe

struct LinprobeArgs {
  std::string dataset;
  std::string task = "groundability";
  std::string cache;
  std::string provider;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double C = 1.0;
  std::optional<std::size_t> max_iter;
  std::string out;
};

int cmd_linprobe(const LinprobeArgs& a) {
  if (a.task != "groundability" && a.task != "nli") {
    throw Error(Errc::ValidationError, "--task must be groundability or nli");
  }
  std::optional<std::filesystem::path> cache_path;
  if (!a.cache.empty()) {
    cache_path = a.cache;
  } else if (!a.provider.empty()) {
    cache_path = vlu::default_cache_path(a.provider);
  }
  if (!cache_path && a.provider.empty()) {
    throw Error(Errc::ValidationError, "linprobe needs --cache or --provider");
  }

  std::vector<std::string> texts;
  std::vector<int> labels;
  if (a.task == "groundability") {
    for (auto& r : vlu::read_labeled(a.dataset)) {
      texts.push_back(r.phrase);
      labels.push_back(r.label);
    }
  } else {
    auto data = vlu::load_mnli(a.dataset);
    for (auto& p : data.records) {
      texts.push_back(p.premise);
      texts.push_back(p.hypothesis);
      labels.push_back(p.label);
    }
  }

  vlu::EmbeddingCache cache = cache_path ? vlu::EmbeddingCache::load(*cache_path) : vlu::EmbeddingCache{};
  std::unique_ptr<vlu::ModelProvider> provider;
  if (!a.provider.empty()) provider = vlu::ProviderSpec::parse(a.provider).open();
  const auto before = cache.size();
  const auto vectors = cache.resolve(texts, provider.get());
  if (provider && cache_path && cache.size() != before) cache.save(*cache_path);

  std::vector<std::vector<double>> rows;
  if (a.task == "groundability") {
    rows = vectors;
  } else {
    for (std::size_t i = 0; i + 1 < vectors.size(); i += 2) rows.push_back(vlu::pair_features(vectors[i], vectors[i + 1]));
  }
  const auto features = vlu::FeatureMatrix::from_rows(rows);
  vlu::FitOptions fit;
  fit.C = a.C;
  fit.max_iter = a.max_iter.value_or(a.task == "groundability" ? vlu::kGroundabilityMaxIter : vlu::kNliMaxIter);
  const auto result = vlu::kfold_auc(features, labels, a.folds, a.seed, fit);
  for (const auto& w : result.warnings) diagnose("warning", "SkippedFold", w);

  OJson j;
  j["task"] = a.task;
  j["items"] = labels.size();
  j["folds"] = a.folds;
  j["evaluated_folds"] = result.evaluated_folds;
  j["fold_auc"] = result.fold_auc;
  j["mean"] = result.mean;
  j["std"] = result.std;
  write_output(a.out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return 0;
}

// ---------------------------------------------------------------------------
// serve / conformance

struct ServeArgs {
  std::string provider = "mock";
  std::string transport = "stdio";
  bool once = false;
};

int cmd_serve(const ServeArgs& a) {
  auto provider = vlu::ProviderSpec::parse(a.provider).open();
  if (a.transport == "stdio") {
    auto channel = vlu::make_stream_channel(std::cin, std::cout);
    vlu::serve(*provider, *channel);
    return 0;
  }
  if (!a.transport.starts_with("tcp:")) throw Error(Errc::ValidationError, "--transport must be stdio or tcp:PORT");
  unsigned long port = 0;
  try {
    port = std::stoul(a.transport.substr(4));
  } catch (const std::exception&) {
    throw Error(Errc::ValidationError, "bad port in '" + a.transport + "'");
  }
  if (port > 65535) throw Error(Errc::ValidationError, "port out of range");
  vlu::TcpListener listener(static_cast<std::uint16_t>(port));
  diagnose("info", "Listening", "127.0.0.1:" + std::to_string(listener.port()));
  do {
    auto channel = listener.accept();
    vlu::serve(*provider, *channel);
  } while (!a.once);
  return 0;
}

struct ConformanceArgs {
  std::string provider = "mock";
  std::string transcript;
  double tol = 1e-4;
};

int cmd_conformance(const ConformanceArgs& a) {
  const auto spec = vlu::ProviderSpec::parse(a.provider);
  std::unique_ptr<vlu::LineChannel> channel;
  if (const auto* s = std::get_if<vlu::StdioSpec>(&spec.target)) {
    channel = vlu::spawn_stdio_channel(s->command);
  } else if (const auto* t = std::get_if<vlu::TcpSpec>(&spec.target)) {
    channel = vlu::connect_tcp_channel(t->host, t->port);
  } else {
    const auto self = std::filesystem::read_symlink("/proc/self/exe").string();
    channel = vlu::spawn_stdio_channel("'" + self + "' serve --provider '" + spec.text + "'");
  }
  std::ifstream in(a.transcript, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open transcript " + a.transcript);
  const auto report = vlu::replay_transcript(*channel, in, a.tol);
  for (const auto& m : report.mismatches) diagnose("error", "TranscriptMismatch", m);
  std::cout << (report.passed() ? "PASS" : "FAIL") << ' ' << report.exchanges << " exchanges, "
            << report.mismatches.size() << " mismatches\n";
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot probing of text encoders over a model-provider protocol"};
  app.require_subcommand(1);
  const std::string provider_help = "Provider: mock[:dim=D,seed=S] | stdio:cmd=\"...\" | tcp:HOST:PORT";

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Score a task file and write results JSON");
  run_cmd->add_option("--task", run.task, "Task file (JSON)")->required();
  run_cmd->add_option("--provider", run.provider, provider_help);
  run_cmd->add_option("--out", run.out, "Results JSON path (stdout if omitted)");
  run_cmd->add_option("--markdown", run.markdown, "Markdown table path");
  run_cmd->add_option("--scores", run.scores, "Per-item score rows (JSONL)");
  run_cmd->add_option("--jobs", run.jobs, "Provider connections / workers")->check(CLI::PositiveNumber);
  run_cmd->add_option("--batch", run.batch, "Items per work unit")->check(CLI::PositiveNumber);
  run_cmd->add_option("--bootstrap", run.bootstrap, "Bootstrap resamples for the best prompt");
  run_cmd->add_option("--bootstrap-seed", run.bootstrap_seed, "Bootstrap seed");

  BiasArgs bias;
  auto* bias_cmd = app.add_subcommand("bias", "Count color bigrams in a caption corpus");
  bias_cmd->add_option("--corpus", bias.corpus, "Text or gzip corpus, one caption per line")->required();
  bias_cmd->add_option("--colors", bias.colors, "Color list, one per line")->required();
  bias_cmd->add_option("--targets", bias.targets, "Target words, one per line")->required();
  bias_cmd->add_option("--golds", bias.golds, "Color gold JSONL for accuracy");
  bias_cmd->add_option("--golds-dataset", bias.golds_dataset, "ctd | ncd");
  bias_cmd->add_option("--shards", bias.shards, "Parallel shards")->check(CLI::PositiveNumber);
  bias_cmd->add_option("--out", bias.out, "Counts TSV (stdout if omitted)");

  GroundgenArgs gg;
  auto* gg_cmd = app.add_subcommand("groundgen", "Generate labeled groundability phrases");
  gg_cmd->add_option("--verbs", gg.verbs, "Verb stems, one per line")->required();
  gg_cmd->add_option("--nouns", gg.nouns, "Nouns, one per line")->required();
  gg_cmd->add_option("--n", gg.n, "Phrases to sample")->required();
  gg_cmd->add_option("--seed", gg.seed, "Sampling seed");
  gg_cmd->add_option("--percentile", gg.percentile, "NLL percentile kept");
  gg_cmd->add_option("--provider", gg.provider, provider_help);
  gg_cmd->add_option("--jobs", gg.jobs, "Provider connections for NLI labeling")->check(CLI::PositiveNumber);
  gg_cmd->add_option("--out", gg.out, "Output JSONL (stdout if omitted)");

  LinprobeArgs lp;
  auto* lp_cmd = app.add_subcommand("linprobe", "k-fold logistic-regression probe on embeddings");
  lp_cmd->add_option("--dataset", lp.dataset, "groundgen JSONL or NLI pair JSONL")->required();
  lp_cmd->add_option("--task", lp.task, "groundability | nli");
  lp_cmd->add_option("--cache", lp.cache, "Embedding cache JSONL");
  lp_cmd->add_option("--provider", lp.provider, provider_help);
  lp_cmd->add_option("--folds", lp.folds, "Number of folds")->check(CLI::PositiveNumber);
  lp_cmd->add_option("--seed", lp.seed, "Fold shuffle seed");
  lp_cmd->add_option("--C", lp.C, "Inverse regularization strength");
  lp_cmd->add_option("--max-iter", lp.max_iter, "L-BFGS iterations (default by task)");
  lp_cmd->add_option("--out", lp.out, "Result JSON (stdout if omitted)");

  ServeArgs sv;
  auto* sv_cmd = app.add_subcommand("serve", "Serve a provider over the NDJSON protocol");
  sv_cmd->add_option("--provider", sv.provider, provider_help);
  sv_cmd->add_option("--transport", sv.transport, "stdio | tcp:PORT (0 picks a free port)");
  sv_cmd->add_flag("--once", sv.once, "Exit after the first TCP connection closes");

  ConformanceArgs cf;
  auto* cf_cmd = app.add_subcommand("conformance", "Replay a golden protocol transcript against a provider");
  cf_cmd->add_option("--provider", cf.provider, provider_help);
  cf_cmd->add_option("--transcript", cf.transcript, "Transcript file")->required();
  cf_cmd->add_option("--tol", cf.tol, "Float tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnose("error", "UsageError", e.what());
    return kExitInvalid;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (bias_cmd->parsed()) return cmd_bias(bias);
    if (gg_cmd->parsed()) return cmd_groundgen(gg);
    if (lp_cmd->parsed()) return cmd_linprobe(lp);
    if (sv_cmd->parsed()) return cmd_serve(sv);
    if (cf_cmd->parsed()) return cmd_conformance(cf);
  } catch (const Error& e) {
    diagnose("error", std::string(vlu::errc_name(e.code())), e.detail(), e.index());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    diagnose("error", "Internal", e.what());
    return 1;
  }
  return 1;
}
