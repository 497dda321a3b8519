// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit when
// any fails. Tolerances and time limits are pinned below.
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <streambuf>
#include <string>
#include <vector>

#include "../oracles/brute_force.hpp"
#include "vlu/datasets.hpp"
#include "vlu/error.hpp"
#include "vlu/groundability.hpp"
#include "vlu/linear_probe.hpp"
#include "vlu/metrics.hpp"
#include "vlu/probing.hpp"
#include "vlu/reporting_bias.hpp"

using namespace vlu;
namespace fs = std::filesystem;

namespace {

constexpr double kMetricTol = 1e-9;
constexpr double kMetricSeconds = 10.0;
constexpr double kStroopTol = 1e-9;
constexpr double kStroopSeconds = 5.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kLogRegSeconds = 30.0;
constexpr long kMaxRssGrowthKiB = 1024;
constexpr std::size_t kStreamLines = 10'000'000;

const fs::path kFixtures = VLU_FIXTURE_DIR;
const fs::path kGolden = fs::path(VLU_GOLDEN_DIR) / "results";

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

long max_rss_kib() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  Timer t;
  using V = std::vector<double>;
  o.require(near(pearson(V{1, 2, 3, 4}, V{1, 3, 2, 4}), 0.8, kMetricTol), "pearson 0.8");
  o.require(near(spearman(V{1, 2, 3}, V{3, 1, 2}), -0.5, kMetricTol), "spearman -0.5");
  o.require(near(kendall_tau_b(V{1, 2, 3, 4}, V{1, 3, 2, 4}), 4.0 / 6.0, kMetricTol), "tau 2/3");
  o.require(near(kendall_tau_b(V{1, 1, 2}, V{1, 2, 3}), 2.0 / std::sqrt(6.0), kMetricTol), "tau-b with ties");
  o.require(near(roc_auc(V{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0}), 0.75, kMetricTol), "auc 0.75");
  o.require(near(roc_auc(V{1, 1, 1, 1}, std::vector<int>{1, 0, 1, 0}), 0.5, kMetricTol), "auc of ties");
  {
    std::vector<std::vector<Label>> r{{"a", "b"}, {"b", "a"}, {"c", "a"}};
    std::vector<Label> g{"a", "a", "a"};
    o.require(near(recall_at_k(r, g, 1), 1.0 / 3.0, kMetricTol), "recall@1 1/3");
    o.require(near(recall_at_k(r, g, 2), 1.0, kMetricTol), "recall@2 1");
    std::vector<std::vector<Label>> us{{"u.s.", "canada"}};
    std::vector<Label> usa{"usa"};
    std::vector<LabelSet> eq{{"u.s.", "us", "usa", "u.s.a.", "u.s"}};
    o.require(recall_at_k(us, usa, 1, eq) == 1.0, "recall with equivalence");
  }

  std::mt19937_64 rng(2024);
  std::size_t instances = 0;
  double worst = 0.0;
  while (instances < 1000) {
    const std::size_t n = 2 + rng() % 14;
    const auto levels = 2 + rng() % 6;
    std::vector<double> x(n), y(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % levels) + (instances % 2 ? 0.0 : std::ldexp(double(rng() % 1024), -10));
      y[i] = static_cast<double>(rng() % levels);
      labels[i] = static_cast<int>(rng() % 2);
    }
    const bool both_classes = std::count(labels.begin(), labels.end(), 1) % static_cast<long>(n) != 0;
    if (!oracle::has_variance(x) || !oracle::has_variance(y) || !both_classes) continue;
    ++instances;
    worst = std::max({worst, std::abs(pearson(x, y) - oracle::pearson(x, y)),
                      std::abs(spearman(x, y) - oracle::spearman(x, y)),
                      std::abs(kendall_tau_b(x, y) - oracle::kendall_tau_b(x, y)),
                      std::abs(roc_auc(x, labels) - oracle::roc_auc(x, labels))});
  }
  o.require(worst <= kMetricTol, "random instances deviate by " + fmt("%.3g", worst));
  const double secs = t.seconds();
  o.require(secs < kMetricSeconds, "took " + fmt("%.2f", secs) + " s");
  if (o.ok) o.detail = "1000 random instances, max deviation " + fmt("%.2g", worst) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

class ScaledMock final : public ModelProvider {
 public:
  ScaledMock(MockConfig c, double scale) : inner_(make_mock_provider(c)), scale_(scale) {}
  ProviderInfo info() override { return inner_->info(); }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    auto out = inner_->embed(texts);
    for (auto& v : out) {
      for (auto& x : v) x *= scale_;
    }
    return out;
  }
  std::vector<double> mlm_logprobs(const std::string& m, std::span<const std::string> c) override {
    return inner_->mlm_logprobs(m, c);
  }
  std::size_t token_count(const std::string& t) override { return inner_->token_count(t); }
  std::vector<double> sequence_nll(std::span<const std::string> t) override { return inner_->sequence_nll(t); }
  NliProbs nli(const std::string& p, const std::string& h) override { return inner_->nli(p, h); }

 private:
  std::unique_ptr<ModelProvider> inner_;
  double scale_;
};

Outcome stroop_invariance() {
  Outcome o;
  Timer t;
  std::mt19937_64 rng(77);
  const std::vector<std::string> colors{"red", "orange", "yellow", "green", "blue", "black", "white", "grey", "brown"};
  const std::vector<std::string> words{"apple", "banana", "sky", "coal", "snow", "grass", "carrot", "crow"};
  const PromptTemplate tmpl("A picture of a [*] <w>");
  double worst = 0.0, worst_self = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const MockConfig c{.dim = 2 + rng() % 63, .seed = rng()};
    const double lambda = std::exp(std::uniform_real_distribution<>(-10.0, 10.0)(rng));
    ScaledMock base(c, 1.0), scaled(c, lambda);
    for (const auto& w : words) {
      std::vector<std::string> completed;
      for (const auto& col : colors) completed.push_back(render(tmpl, {.item = w, .slot_value = col}));
      const auto masked = render(tmpl, {.item = w});
      const auto a = stroop_scores(base, masked, completed);
      const auto b = stroop_scores(scaled, masked, completed);
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      o.require(predict_categorical(a) == predict_categorical(b), "prediction changed under rescaling");
      o.require(rank_candidates(a) == rank_candidates(b), "ranking changed under rescaling");
      const auto self = stroop_scores(scaled, masked, std::vector<std::string>{masked});
      worst_self = std::max(worst_self, std::abs(self[0] - 1.0));
    }
  }
  o.require(worst <= kStroopTol, "score deviation " + fmt("%.3g", worst));
  o.require(worst_self <= kStroopTol, "self-similarity deviation " + fmt("%.3g", worst_self));
  const double secs = t.seconds();
  o.require(secs < kStroopSeconds, "took " + fmt("%.2f", secs) + " s");
  if (o.ok) {
    o.detail = "100 configs, max |ds| " + fmt("%.2g", worst) + ", max |self-1| " + fmt("%.2g", worst_self) + ", " +
               fmt("%.2f", secs) + " s";
  }
  return o;
}

Outcome mlm_argmax() {
  Outcome o;
  std::mt19937_64 rng(31);
  const std::vector<std::string> vocab{"red", "green", "blue", "cat", "dog", "on", "under", "tall", "paris", "rome",
                                       "one", "two", "seven", "yes", "no", "big"};
  std::size_t rows = 0;
  for (; rows < 1000; ++rows) {
    auto p = make_mock_provider({.dim = 8, .seed = rng()});
    auto pool = vocab;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(2 + rng() % (vocab.size() - 2));
    const CandidateSet cands(pool);
    const std::string masked = "row " + std::to_string(rng() % 100000) + " is [MASK] today";
    const auto scores = mlm_scores(*p, masked, cands);
    const auto direct = p->mlm_logprobs(masked, pool);
    std::size_t best = 0;
    for (std::size_t i = 1; i < direct.size(); ++i) {
      if (direct[i] > direct[best]) best = i;
    }
    if (predict_categorical(scores) != best) {
      o.require(false, "row " + std::to_string(rows) + " disagrees");
      break;
    }
  }
  if (o.ok) o.detail = std::to_string(rows) + " rows, exact agreement";
  return o;
}

Outcome logistic_regression() {
  Outcome o;
  Timer t;
  std::mt19937_64 rng(11);
  std::normal_distribution<> g;
  std::uniform_real_distribution<> u(-2.0, 2.0);
  auto blobs = [&](std::size_t n, std::size_t d, double sep) {
    std::pair<FeatureMatrix, std::vector<int>> out{FeatureMatrix(n, d), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      out.second[i] = static_cast<int>(i % 2);
      for (std::size_t j = 0; j < d; ++j) out.first.at(i, j) = g(rng) + (j == 0 ? (out.second[i] ? sep : -sep) : 0.0);
    }
    return out;
  };

  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    const std::size_t d = 1 + rng() % 8;
    auto [x, y] = blobs(5 + rng() % 30, d, 0.5);
    std::vector<double> params(d + 1), grad(d + 1);
    for (auto& v : params) v = u(rng);
    const double C = std::exp(u(rng));
    logreg_objective(x, y, params, C, grad);
    for (std::size_t k = 0; k <= d; ++k) {
      auto plus = params, minus = params;
      plus[k] += 1e-6;
      minus[k] -= 1e-6;
      const double num = (logreg_objective(x, y, plus, C) - logreg_objective(x, y, minus, C)) / 2e-6;
      worst = std::max(worst, std::abs(num - grad[k]) / std::max(1.0, std::abs(num)));
    }
  }
  o.require(worst <= kGradRelTol, "gradient relative error " + fmt("%.3g", worst));

  auto [bx, by] = blobs(200, 16, 6.0);
  const auto kf = kfold_auc(bx, by, 5, 0, {.max_iter = kGroundabilityMaxIter});
  o.require(kf.fold_auc.size() == 5, "not every fold evaluated");
  for (const double a : kf.fold_auc) o.require(a == 1.0, "fold AUC " + fmt("%.6f", a));

  for (int trial = 0; trial < 20; ++trial) {
    auto [x, y] = blobs(80, 6, 0.8);
    const auto m = fit(x, y, {.C = 10.0, .max_iter = kNliMaxIter});
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i) {
      o.require(m.objective_trace[i] <= m.objective_trace[i - 1], "objective increased");
    }
  }
  const double secs = t.seconds();
  o.require(secs < kLogRegSeconds, "took " + fmt("%.2f", secs) + " s");
  if (o.ok) o.detail = "max grad rel err " + fmt("%.2g", worst) + ", 5-fold AUC 1.0, " + fmt("%.2f", secs) + " s";
  return o;
}

Outcome loader_fidelity() {
  Outcome o;
  auto mock = make_mock_provider({});
  ModelProvider* one[] = {mock.get()};
  auto check = [&](const std::string& name, const LoadReport& r, std::size_t input, std::size_t kept,
                   std::map<std::string, std::size_t> dropped) {
    o.require(r.input_count == input, name + " input " + std::to_string(r.input_count));
    o.require(r.kept == kept, name + " kept " + std::to_string(r.kept));
    o.require(r.dropped == dropped, name + " drop reasons differ");
    o.require(r.balanced(), name + " input != kept + dropped");
  };
  check("concreteness", load_concreteness(kFixtures / "concreteness.jsonl").report, 5, 2,
        {{"multiword", 2}, {"not_noun", 1}});
  check("ctd", load_color(kFixtures / "ctd.jsonl", ColorDataset::CTD).report, 10, 10, {});
  check("ncd", load_color(kFixtures / "ncd.jsonl", ColorDataset::NCD).report, 6, 4, {{"purple_only", 2}});
  check("shapeit", load_shapeit(kFixtures / "shapeit.jsonl").report, 6, 6, {});
  check("cities", load_cities(kFixtures / "cities.jsonl", one).report, 6, 5, {{"multi_token_answer", 1}});
  check("cbt", load_cbt(kFixtures / "cbt.jsonl", one).report, 6, 3,
        {{"multi_token_answer", 1}, {"pos_group", 1}, {"too_long", 1}});
  check("imdb", load_imdb(kFixtures / "imdb.jsonl", 11, one).report, 6, 4, {{"empty", 1}, {"too_long", 1}});
  check("mnli", load_mnli(kFixtures / "mnli.jsonl").report, 3, 2, {{"neutral", 1}});
  if (o.ok) o.detail = "8 loaders, exact counts and accounting";
  return o;
}

// Produces `lines` caption lines on demand so the corpus never exists in memory.
class GeneratedCorpus final : public std::streambuf {
 public:
  explicit GeneratedCorpus(std::size_t lines) : remaining_(lines) {}

 protected:
  int_type underflow() override {
    if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
    if (remaining_ == 0) return traits_type::eof();
    static const char* kLines[] = {"a red apple on the table\n", "Green grass and a grey sky\n",
                                   "nothing to see here at all\n", "brown banana, yellow banana\n"};
    buf_ = kLines[remaining_ % 4];
    --remaining_;
    setg(buf_.data(), buf_.data(), buf_.data() + buf_.size());
    return traits_type::to_int_type(*gptr());
  }

 private:
  std::size_t remaining_;
  std::string buf_;
};

Outcome reporting_bias() {
  Outcome o;
  const auto colors = read_word_list(kFixtures / "bias_colors.txt");
  const auto targets = read_word_list(kFixtures / "bias_targets.txt");
  const auto c = count_file(kFixtures / "bias_corpus.txt", colors, targets, 1);
  // hand enumeration of the fixture corpus
  const std::vector<std::tuple<const char*, const char*, std::uint64_t>> cells{
      {"apple", "red", 3}, {"apple", "green", 1}, {"banana", "yellow", 1}, {"banana", "brown", 2},
      {"sky", "grey", 1},  {"sky", "blue", 0},    {"grass", "green", 1}};
  const std::vector<std::pair<const char*, std::uint64_t>> totals{
      {"apple", 5}, {"banana", 3}, {"sky", 2}, {"grass", 2}, {"tree", 1}};
  for (const auto& [w, col, n] : cells) o.require(c.n_cw(col, w) == n, std::string("n(") + col + "," + w + ")");
  std::uint64_t nonzero = 0;
  for (const auto& w : targets) {
    for (const auto& col : colors) nonzero += c.n_cw(col, w) > 0;
  }
  o.require(nonzero == 6, "unexpected nonzero bigram cells");
  for (const auto& [w, n] : totals) o.require(c.n_w(w) == n, std::string("n(") + w + ")");
  const auto golds = load_color(kFixtures / "bias_golds.jsonl", ColorDataset::CTD).records;
  o.require(evaluate_bias(c, golds).accuracy == 0.5, "fixture accuracy");

  std::ostringstream one, four;
  c.write_tsv(one);
  count_file(kFixtures / "bias_corpus.txt", colors, targets, 4).write_tsv(four);
  o.require(one.str() == four.str(), "4-shard TSV differs from 1-shard TSV");

  BigramCounts stream(colors, targets);
  {
    GeneratedCorpus warm(1000);
    std::istream in(&warm);
    stream.add_stream(in);
  }
  const auto cells_before = stream.cell_count();
  const long rss_before = max_rss_kib();
  GeneratedCorpus big(kStreamLines - 1000);
  std::istream in(&big);
  stream.add_stream(in);
  const long growth = max_rss_kib() - rss_before;
  o.require(stream.lines() == kStreamLines, "streamed " + std::to_string(stream.lines()) + " lines");
  o.require(stream.n_w("banana") == kStreamLines / 2, "stream banana count");
  o.require(stream.cell_count() == cells_before, "counter grew with the corpus");
  o.require(growth < kMaxRssGrowthKiB, "RSS grew by " + std::to_string(growth) + " KiB");
  if (o.ok) o.detail = "hand counts exact, shards byte-identical, 10M lines with RSS growth " + std::to_string(growth) + " KiB";
  return o;
}

Outcome groundability() {
  Outcome o;
  auto mock = make_mock_provider({.dim = 8, .seed = 1});
  ModelProvider* one[] = {mock.get()};
  const auto verbs = read_word_list(kFixtures / "verbs.txt");
  const auto nouns = read_word_list(kFixtures / "nouns.txt");
  const auto rows = run_groundgen(verbs, nouns, {.n = 10, .seed = 1}, one);
  std::ostringstream a, b;
  write_labeled(a, rows);
  write_labeled(b, run_groundgen(verbs, nouns, {.n = 10, .seed = 1}, one));
  o.require(a.str() == b.str(), "two runs differ");
  o.require(a.str() == read_file(kGolden / "groundgen.jsonl"), "differs from golden groundgen.jsonl");

  std::vector<std::string> vs, ns;
  for (int i = 0; i < 25; ++i) vs.push_back("verb" + std::to_string(i));
  for (int i = 0; i < 20; ++i) ns.push_back("noun" + std::to_string(i));
  const auto phrases = generate_phrases(vs, ns);
  for (const std::size_t n : {7, 10, 37, 100, 251, 500}) {
    const auto sample = sample_n(phrases, n, n);
    auto scores = mock->sequence_nll(sample);
    std::sort(scores.begin(), scores.end());
    if (std::adjacent_find(scores.begin(), scores.end()) != scores.end()) {
      o.require(false, "fixture of size " + std::to_string(n) + " has tied NLLs");
      continue;
    }
    const auto kept = nll_percentile_filter(sample, *mock, 20.0).size();
    const auto expected = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n)));
    o.require(kept == expected, "n=" + std::to_string(n) + " kept " + std::to_string(kept));
  }
  if (o.ok) o.detail = "golden output reproduced; ceil(0.2 n) kept for 6 tie-free sizes";
  return o;
}

Outcome cli_goldens() {
  Outcome o;
  const fs::path work = fs::temp_directory_path() / "vlu_acceptance_cli";
  fs::create_directories(work);
  const std::string cli = VLU_CLI_PATH;
  const std::string mock = "mock:dim=8,seed=1";
  auto run = [&](const std::string& args) {
    const std::string cmd = "'" + cli + "' " + args + " > '" + (work / "stdout.txt").string() + "' 2> /dev/null";
    return std::system(cmd.c_str());
  };
  auto same = [&](const fs::path& produced, const std::string& golden) {
    o.require(fs::exists(produced) && read_file(produced) == read_file(kGolden / golden), golden + " differs");
  };
  const auto fx = kFixtures.string();
  std::size_t files = 0;
  for (const char* task : {"ctd_sp", "ctd_mlm", "ncd_sp", "shape_noun_sp", "shape_adj_sp", "concreteness_sp",
                           "cities_sp", "cbt_p_mlm", "imdb_sp"}) {
    const auto json = work / (std::string(task) + ".json");
    const auto md = work / (std::string(task) + ".md");
    fs::remove(json);
    fs::remove(md);
    o.require(run("run --task '" + fx + "/tasks/" + task + ".json' --provider " + mock + " --out '" + json.string() +
                  "' --markdown '" + md.string() + "'") == 0,
              std::string(task) + " exited non-zero");
    same(json, std::string(task) + ".json");
    same(md, std::string(task) + ".md");
    files += 2;
  }
  const auto tsv = work / "bias.tsv";
  o.require(run("bias --corpus '" + fx + "/bias_corpus.txt' --colors '" + fx + "/bias_colors.txt' --targets '" + fx +
                "/bias_targets.txt' --golds '" + fx + "/bias_golds.jsonl' --shards 4 --out '" + tsv.string() + "'") == 0,
            "bias exited non-zero");
  same(tsv, "bias_counts.tsv");
  same(work / "stdout.txt", "bias_accuracy.txt");
  const auto gg = work / "groundgen.jsonl";
  o.require(run("groundgen --verbs '" + fx + "/verbs.txt' --nouns '" + fx + "/nouns.txt' --n 10 --seed 1 --provider " +
                mock + " --out '" + gg.string() + "'") == 0,
            "groundgen exited non-zero");
  same(gg, "groundgen.jsonl");
  const auto lp = work / "linprobe.json";
  o.require(run("linprobe --dataset '" + fx + "/lp_ground.jsonl' --task groundability --cache '" + fx +
                "/lp_cache.jsonl' --folds 5 --seed 0 --out '" + lp.string() + "'") == 0,
            "linprobe exited non-zero");
  same(lp, "linprobe.json");
  files += 4;
  if (o.ok) o.detail = std::to_string(files) + " golden files byte-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle suite", metric_oracles},
      {"stroop invariance suite", stroop_invariance},
      {"mlm argmax agreement", mlm_argmax},
      {"logistic regression", logistic_regression},
      {"loader filter fidelity", loader_fidelity},
      {"reporting-bias counter", reporting_bias},
      {"groundability pipeline", groundability},
      {"end-to-end cli goldens", cli_goldens},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s: %s\n", out.ok ? "PASS" : "FAIL", name, out.detail.c_str());
    std::fflush(stdout);
    failures += !out.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
