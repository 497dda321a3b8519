// SPDX-License-Identifier: Apache-2.0
//
// Bigram counting of (color, word) adjacency over caption streams and the
// argmax color estimate P(c|w) = n_cw / n_w.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <map>
#include <vector>

#include "vlu/datasets.hpp"

namespace vlu {

/// Lowercases ASCII and splits on anything that is not a letter or digit.
/// Bytes >= 0x80 are treated as letters so UTF-8 words stay whole.
/// Calls fn(token) with views into `scratch`.
template <typename Fn>
void for_each_token(std::string_view line, std::string& scratch, Fn&& fn);

class BigramCounts {
 public:
  /// ValidationError for multiword targets or colors; DuplicateEntry for
  /// repeats; EmptyList when either list is empty.
  BigramCounts(std::vector<std::string> colors, std::vector<std::string> targets);

  void add_line(std::string_view line);
  /// Counts every line of `in`.
  void add_stream(std::istream& in);
  /// Field-wise sum. ValidationError when color/target lists differ.
  void merge(const BigramCounts& other);

  const std::vector<std::string>& colors() const noexcept { return colors_; }
  const std::vector<std::string>& targets() const noexcept { return targets_; }
  std::uint64_t lines() const noexcept { return lines_; }
  /// 0 for words outside the target set.
  std::uint64_t n_w(std::string_view word) const;
  std::uint64_t n_cw(std::string_view color, std::string_view word) const;
  /// Number of counter cells; independent of corpus length.
  std::size_t cell_count() const noexcept { return n_w_.size() + n_cw_.size(); }

  /// `word\tcolor\tcount` for every (target, color) then `word\t*\ttotal`,
  /// in target order.
  void write_tsv(std::ostream& os) const;

  /// Compares configuration and counts.
  friend bool operator==(const BigramCounts& a, const BigramCounts& b) {
    return a.colors_ == b.colors_ && a.targets_ == b.targets_ && a.n_w_ == b.n_w_ && a.n_cw_ == b.n_cw_ &&
           a.lines_ == b.lines_;
  }

 private:
  std::vector<std::string> colors_;
  std::vector<std::string> targets_;
  std::map<std::string, std::size_t, std::less<>> color_index_;
  std::map<std::string, std::size_t, std::less<>> target_index_;
  std::vector<std::uint64_t> n_w_;
  std::vector<std::uint64_t> n_cw_;  // [target * colors + color]
  std::uint64_t lines_ = 0;
  std::string scratch_;
};

/// Counts a plain or gzip file. With shards > 1 each worker reads the file
/// and takes lines whose index is congruent to its shard id; results are
/// merged.
BigramCounts count_file(const std::filesystem::path& path, const std::vector<std::string>& colors,
                        const std::vector<std::string>& targets, unsigned shards = 1);

/// UnseenWord when n_w == 0.
double color_prob(const BigramCounts& counts, std::string_view color, std::string_view word);
/// Ties go to the earliest color. UnseenWord, NoColorEvidence.
std::string estimate_color(const BigramCounts& counts, std::string_view word);

struct BiasWordResult {
  std::string word;
  std::vector<std::string> golds;
  std::optional<std::string> estimate;
  bool correct = false;
};

struct BiasEvaluation {
  double accuracy = 0.0;
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  /// Gold words without an estimate (unseen or never after a color).
  std::vector<std::string> no_evidence;
  std::vector<BiasWordResult> words;
};

/// EmptyList when no gold word has an estimate.
BiasEvaluation evaluate_bias(const BigramCounts& counts, std::span<const ColorRecord> golds);

// ---------------------------------------------------------------------------

template <typename Fn>
void for_each_token(std::string_view line, std::string& scratch, Fn&& fn) {
  scratch.assign(line);
  std::size_t start = 0;
  bool in_token = false;
  for (std::size_t i = 0; i <= scratch.size(); ++i) {
    bool word_char = false;
    if (i < scratch.size()) {
      auto ch = static_cast<unsigned char>(scratch[i]);
      if (ch >= 'A' && ch <= 'Z') {
        scratch[i] = static_cast<char>(ch + ('a' - 'A'));
        word_char = true;
      } else {
        word_char = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch >= 0x80;
      }
    }
    if (word_char && !in_token) {
      start = i;
      in_token = true;
    } else if (!word_char && in_token) {
      fn(std::string_view(scratch).substr(start, i - start));
      in_token = false;
    }
  }
}

}  // namespace vlu
