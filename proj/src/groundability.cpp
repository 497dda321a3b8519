// SPDX-License-Identifier: Apache-2.0
#include "vlu/groundability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "vlu/error.hpp"
#include "vlu/hash.hpp"

namespace vlu {
namespace {

void check_list(std::span<const std::string> words, const char* what) {
  if (words.empty()) throw Error(Errc::EmptyList, std::string(what) + " list is empty");
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!seen.insert(words[i]).second) {
      throw Error(Errc::DuplicateEntry, std::string(what) + " '" + words[i] + "' listed twice", i);
    }
  }
}

}  // namespace

std::vector<std::string> generate_phrases(std::span<const std::string> verbs, std::span<const std::string> nouns) {
  check_list(verbs, "verb");
  check_list(nouns, "noun");
  std::vector<std::string> out;
  out.reserve(verbs.size() * nouns.size());
  for (const auto& v : verbs) {
    for (const auto& n : nouns) out.push_back("Alex " + v + "ing Riley's " + n);
  }
  return out;
}

std::vector<std::string> sample_n(std::span<const std::string> phrases, std::size_t n, std::uint64_t seed) {
  if (n > phrases.size()) {
    throw Error(Errc::InvalidArgument, "cannot sample " + std::to_string(n) + " of " +
                                           std::to_string(phrases.size()) + " phrases");
  }
  // Sparse Fisher-Yates: only displaced positions are stored.
  std::unordered_map<std::size_t, std::size_t> moved;
  auto at = [&](std::size_t i) {
    auto it = moved.find(i);
    return it == moved.end() ? i : it->second;
  };
  SplitMix64 rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  const std::size_t size = phrases.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(size - i));
    const std::size_t vi = at(i);
    const std::size_t vj = at(j);
    moved[j] = vi;
    moved[i] = vj;
    out.push_back(phrases[vj]);
  }
  return out;
}

double nearest_rank(std::span<const double> values, double percentile) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "percentile of an empty list");
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw Error(Errc::InvalidArgument, "percentile must be in (0,100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<ScoredPhrase> nll_percentile_filter(std::span<const std::string> phrases, ModelProvider& provider,
                                                double percentile, std::size_t batch) {
  if (batch == 0) batch = 1;
  std::vector<double> nll;
  nll.reserve(phrases.size());
  for (std::size_t b = 0; b < phrases.size(); b += batch) {
    const auto len = std::min(batch, phrases.size() - b);
    auto got = provider.sequence_nll(phrases.subspan(b, len));
    if (got.size() != len) throw Error(Errc::ProviderError, "sequence_nll returned the wrong count");
    nll.insert(nll.end(), got.begin(), got.end());
  }
  std::vector<ScoredPhrase> out;
  if (phrases.empty()) return out;
  const double threshold = nearest_rank(nll, percentile);
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (nll[i] <= threshold) out.push_back({phrases[i], nll[i]});
  }
  return out;
}

std::string ground_premise(const std::string& phrase) { return "This is a picture of " + phrase + "."; }

std::vector<LabeledPhrase> nli_label(std::span<const ScoredPhrase> phrases, std::span<ModelProvider* const> providers) {
  if (providers.empty()) throw Error(Errc::InvalidArgument, "nli_label needs a provider");
  std::vector<LabeledPhrase> out(phrases.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(providers.size());
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = next++; i < phrases.size(); i = next++) {
        const auto probs = providers[w]->nli(ground_premise(phrases[i].phrase), kGroundHypothesis);
        out[i] = {phrases[i].phrase, phrases[i].nll, probs.entailment, entailment_label(probs.entailment)};
      }
    } catch (...) {
      errors[w] = std::current_exception();
      next = phrases.size();
    }
  };
  if (providers.size() == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < providers.size(); ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<LabeledPhrase> run_groundgen(std::span<const std::string> verbs, std::span<const std::string> nouns,
                                         const GroundgenOptions& options, std::span<ModelProvider* const> providers) {
  if (providers.empty()) throw Error(Errc::InvalidArgument, "groundgen needs a provider");
  const auto all = generate_phrases(verbs, nouns);
  const auto sampled = sample_n(all, options.n, options.seed);
  const auto kept = nll_percentile_filter(sampled, *providers[0], options.percentile);
  return nli_label(kept, providers);
}

void write_labeled(std::ostream& os, std::span<const LabeledPhrase> rows) {
  for (const auto& r : rows) {
    nlohmann::ordered_json obj;
    obj["phrase"] = r.phrase;
    obj["nll"] = r.nll;
    obj["p_entailment"] = r.p_entailment;
    obj["label"] = r.label;
    os << obj.dump() << '\n';
  }
}

std::vector<LabeledPhrase> read_labeled(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<LabeledPhrase> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      out.push_back({obj.at("phrase").get<std::string>(), obj.at("nll").get<double>(),
                     obj.at("p_entailment").get<double>(), obj.at("label").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace vlu
