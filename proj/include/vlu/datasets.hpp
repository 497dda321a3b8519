// SPDX-License-Identifier: Apache-2.0
//
// Normalized JSONL dataset loaders with their filtering rules. Every
// non-blank input line either yields a record or is counted under a drop
// reason in the LoadReport.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vlu/prompt.hpp"
#include "vlu/provider.hpp"

namespace vlu {

inline constexpr std::array<std::string_view, 9> kBasicColors{"red",   "orange", "yellow", "green", "blue",
                                                              "black", "white",  "grey",   "brown"};
inline constexpr std::array<std::string_view, 3> kShapes{"rectangle", "circle", "triangle"};
/// Answers treated as one location in the cities cloze task.
inline constexpr std::array<std::string_view, 5> kUsEquivalents{"u.s.", "us", "usa", "u.s.a.", "u.s"};

struct LoadReport {
  std::size_t input_count = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped;

  std::size_t dropped_total() const noexcept;
  /// input_count == kept + sum(dropped).
  bool balanced() const noexcept { return input_count == kept + dropped_total(); }
  void drop(const std::string& reason) { ++dropped[reason]; }
};

template <typename T>
struct Loaded {
  std::vector<T> records;
  LoadReport report;
};

struct ConcretenessRecord {
  std::string word;
  std::string pos;
  double score = 0.0;
};

enum class ColorDataset { CTD, NCD };
ColorDataset parse_color_dataset(std::string_view text);

struct ColorRecord {
  std::string word;
  std::vector<std::string> colors;
};

struct ShapeRecord {
  std::string phrase;
  std::string shape;
  friend bool operator==(const ShapeRecord&, const ShapeRecord&) = default;
};

struct ClozeQuestion {
  /// Question text with a `[*]` slot.
  std::string text;
  std::string answer;
  CandidateSet candidate_pool;
};

struct CbtItem {
  std::string sentence;
  std::string answer;
  CandidateSet candidates;
  /// "N", "V" or "P".
  std::string pos_group;
};

struct ReviewRecord {
  std::string review_id;
  std::string sentence;
  std::string label;
};

struct NliPair {
  std::string premise;
  std::string hypothesis;
  /// 0 = contradiction, 1 = entailment.
  int label = 0;
};

using ProviderList = std::span<ModelProvider* const>;

/// {word, pos, score}; keeps unigram nouns. ParseError, ScoreOutOfRange.
Loaded<ConcretenessRecord> load_concreteness(const std::filesystem::path& path);
/// {word, colors}; NCD drops the purple label (and rows left empty).
/// UnknownColor.
Loaded<ColorRecord> load_color(const std::filesystem::path& path, ColorDataset dataset);
/// {phrase, shape}. UnknownShape.
Loaded<ShapeRecord> load_shapeit(const std::filesystem::path& path);
void save_shapeit(const std::filesystem::path& path, std::span<const ShapeRecord> records);
/// {question, answer}; drops answers that are multi-token for any provider.
/// The candidate pool is every retained answer, first-seen order.
Loaded<ClozeQuestion> load_cities(const std::filesystem::path& path, ProviderList providers);
/// {sentence, answer, candidates[10], pos}; keeps N/V/P groups, drops
/// over-length sentences and multi-token answers.
Loaded<CbtItem> load_cbt(const std::filesystem::path& path, ProviderList providers);
/// {review_id, text, label}; one seeded random sentence per review, then
/// the length filter.
Loaded<ReviewRecord> load_imdb(const std::filesystem::path& path, std::uint64_t seed, ProviderList providers);
/// {premise, hypothesis, label}; neutral pairs removed.
Loaded<NliPair> load_mnli(const std::filesystem::path& path);

/// Words that are a single token for every provider.
std::vector<std::string> single_token_filter(std::span<const std::string> words, ProviderList providers);

/// Minimum max_tokens over providers; SIZE_MAX with no providers.
std::size_t length_limit(ProviderList providers);
/// True when `text` fits the limit under every provider's tokenizer.
bool fits_all(const std::string& text, ProviderList providers, std::size_t limit);

/// One entry per line; blank lines and `#` comments skipped, surrounding
/// whitespace trimmed.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

/// Splits after '.', '!' or '?' when followed by whitespace (or the end).
std::vector<std::string> split_sentences(std::string_view text);

/// Equivalence classes for the cities recall metric.
std::vector<std::vector<std::string>> cities_equivalence();

}  // namespace vlu
