// SPDX-License-Identifier: Apache-2.0
//
// Synthetic groundability data: template cross-product, seeded sampling,
// NLL percentile filtering and zero-shot NLI labels.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vlu/provider.hpp"

namespace vlu {

inline constexpr double kDefaultNllPercentile = 20.0;
inline constexpr const char* kGroundHypothesis = "Riley can be seen in the picture.";

/// "Alex {verb}ing Riley's {noun}" for every pair, verb-major order.
/// EmptyList; DuplicateEntry for repeated verbs or nouns.
std::vector<std::string> generate_phrases(std::span<const std::string> verbs, std::span<const std::string> nouns);

/// First n positions of a seeded Fisher-Yates shuffle. InvalidArgument when
/// n exceeds the input size.
std::vector<std::string> sample_n(std::span<const std::string> phrases, std::size_t n, std::uint64_t seed);

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value (1-based).
/// InvalidArgument for p outside (0,100] or empty input.
double nearest_rank(std::span<const double> values, double percentile);

struct ScoredPhrase {
  std::string phrase;
  double nll = 0.0;
};

/// Scores with sequence_nll in batches and keeps NLL <= the nearest-rank
/// threshold, in input order.
std::vector<ScoredPhrase> nll_percentile_filter(std::span<const std::string> phrases, ModelProvider& provider,
                                                double percentile = kDefaultNllPercentile,
                                                std::size_t batch = 64);

std::string ground_premise(const std::string& phrase);
/// Strictly greater than one half.
inline int entailment_label(double p_entailment) noexcept { return p_entailment > 0.5 ? 1 : 0; }

struct LabeledPhrase {
  std::string phrase;
  double nll = 0.0;
  double p_entailment = 0.0;
  int label = 0;
};

/// Labels each phrase; work is spread over the providers and reassembled in
/// input order.
std::vector<LabeledPhrase> nli_label(std::span<const ScoredPhrase> phrases, std::span<ModelProvider* const> providers);

struct GroundgenOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double percentile = kDefaultNllPercentile;
};

/// generate -> sample_n -> nll filter -> NLI labels.
std::vector<LabeledPhrase> run_groundgen(std::span<const std::string> verbs, std::span<const std::string> nouns,
                                         const GroundgenOptions& options, std::span<ModelProvider* const> providers);

/// JSONL {phrase, nll, p_entailment, label}.
void write_labeled(std::ostream& os, std::span<const LabeledPhrase> rows);
std::vector<LabeledPhrase> read_labeled(const std::filesystem::path& path);

}  // namespace vlu
