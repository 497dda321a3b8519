// SPDX-License-Identifier: Apache-2.0
#include "vlu/reporting_bias.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include <zlib.h>

#include "vlu/error.hpp"

namespace vlu {
namespace {

std::map<std::string, std::size_t, std::less<>> index_words(const std::vector<std::string>& words,
                                                           const char* what) {
  if (words.empty()) throw Error(Errc::EmptyList, std::string(what) + " list is empty");
  std::map<std::string, std::size_t, std::less<>> index;
  std::string scratch;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::size_t tokens = 0;
    bool same = false;
    for_each_token(words[i], scratch, [&](std::string_view t) {
      ++tokens;
      same = (t == words[i]);
    });
    if (tokens != 1 || !same) {
      throw Error(Errc::ValidationError,
                  std::string(what) + " '" + words[i] + "' is not a single lowercase token", i);
    }
    if (!index.emplace(words[i], i).second) {
      throw Error(Errc::DuplicateEntry, std::string(what) + " '" + words[i] + "' listed twice", i);
    }
  }
  return index;
}

// Line reader over a gzFile; zlib reads uncompressed files transparently.
class GzLines {
 public:
  explicit GzLines(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) throw Error(Errc::IoError, "cannot open " + path.string());
    gzbuffer(file_, 1 << 17);
  }
  ~GzLines() { gzclose(file_); }
  GzLines(const GzLines&) = delete;
  GzLines& operator=(const GzLines&) = delete;

  bool next(std::string& line) {
    line.clear();
    for (;;) {
      if (pos_ == len_) {
        const int got = gzread(file_, buf_, sizeof buf_);
        if (got < 0) {
          int err = 0;
          throw Error(Errc::IoError, std::string("gzip read failed: ") + gzerror(file_, &err));
        }
        if (got == 0) return !line.empty();
        pos_ = 0;
        len_ = static_cast<std::size_t>(got);
      }
      const char* begin = buf_ + pos_;
      const auto* nl = static_cast<const char*>(std::memchr(begin, '\n', len_ - pos_));
      if (nl == nullptr) {
        line.append(begin, len_ - pos_);
        pos_ = len_;
        continue;
      }
      line.append(begin, static_cast<std::size_t>(nl - begin));
      pos_ += static_cast<std::size_t>(nl - begin) + 1;
      return true;
    }
  }

 private:
  gzFile file_;
  char buf_[1 << 16];
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
};

}  // namespace

BigramCounts::BigramCounts(std::vector<std::string> colors, std::vector<std::string> targets)
    : colors_(std::move(colors)), targets_(std::move(targets)) {
  color_index_ = index_words(colors_, "color");
  target_index_ = index_words(targets_, "target");
  n_w_.assign(targets_.size(), 0);
  n_cw_.assign(targets_.size() * colors_.size(), 0);
}

void BigramCounts::add_line(std::string_view line) {
  ++lines_;
  std::optional<std::size_t> prev_color;
  for_each_token(line, scratch_, [&](std::string_view tok) {
    auto t = target_index_.find(tok);
    if (t != target_index_.end()) {
      ++n_w_[t->second];
      if (prev_color) ++n_cw_[t->second * colors_.size() + *prev_color];
    }
    auto c = color_index_.find(tok);
    prev_color = c != color_index_.end() ? std::optional<std::size_t>(c->second) : std::nullopt;
  });
}

void BigramCounts::add_stream(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) add_line(line);
}

void BigramCounts::merge(const BigramCounts& other) {
  if (colors_ != other.colors_ || targets_ != other.targets_) {
    throw Error(Errc::ValidationError, "cannot merge counters with different color/target lists");
  }
  for (std::size_t i = 0; i < n_w_.size(); ++i) n_w_[i] += other.n_w_[i];
  for (std::size_t i = 0; i < n_cw_.size(); ++i) n_cw_[i] += other.n_cw_[i];
  lines_ += other.lines_;
}

std::uint64_t BigramCounts::n_w(std::string_view word) const {
  auto t = target_index_.find(word);
  return t == target_index_.end() ? 0 : n_w_[t->second];
}

std::uint64_t BigramCounts::n_cw(std::string_view color, std::string_view word) const {
  auto t = target_index_.find(word);
  auto c = color_index_.find(color);
  if (t == target_index_.end() || c == color_index_.end()) return 0;
  return n_cw_[t->second * colors_.size() + c->second];
}

void BigramCounts::write_tsv(std::ostream& os) const {
  for (std::size_t t = 0; t < targets_.size(); ++t) {
    for (std::size_t c = 0; c < colors_.size(); ++c) {
      os << targets_[t] << '\t' << colors_[c] << '\t' << n_cw_[t * colors_.size() + c] << '\n';
    }
    os << targets_[t] << "\t*\t" << n_w_[t] << '\n';
  }
}

BigramCounts count_file(const std::filesystem::path& path, const std::vector<std::string>& colors,
                        const std::vector<std::string>& targets, unsigned shards) {
  if (shards == 0) throw Error(Errc::InvalidArgument, "shards must be >= 1");
  std::vector<BigramCounts> parts(shards, BigramCounts(colors, targets));
  std::vector<std::exception_ptr> errors(shards);
  auto work = [&](unsigned k) {
    try {
      GzLines reader(path);
      std::string line;
      for (std::uint64_t i = 0; reader.next(line); ++i) {
        if (i % shards == k) parts[k].add_line(line);
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (shards == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < shards; ++k) pool.emplace_back(work, k);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (unsigned k = 1; k < shards; ++k) parts[0].merge(parts[k]);
  return std::move(parts[0]);
}

double color_prob(const BigramCounts& counts, std::string_view color, std::string_view word) {
  const auto n = counts.n_w(word);
  if (n == 0) throw Error(Errc::UnseenWord, "word '" + std::string(word) + "' never observed");
  return static_cast<double>(counts.n_cw(color, word)) / static_cast<double>(n);
}

std::string estimate_color(const BigramCounts& counts, std::string_view word) {
  if (counts.n_w(word) == 0) throw Error(Errc::UnseenWord, "word '" + std::string(word) + "' never observed");
  const std::string* best = nullptr;
  std::uint64_t best_n = 0;
  for (const auto& c : counts.colors()) {
    const auto n = counts.n_cw(c, word);
    if (n > best_n) {
      best_n = n;
      best = &c;
    }
  }
  if (best == nullptr) {
    throw Error(Errc::NoColorEvidence, "word '" + std::string(word) + "' never follows a color");
  }
  return *best;
}

BiasEvaluation evaluate_bias(const BigramCounts& counts, std::span<const ColorRecord> golds) {
  BiasEvaluation out;
  for (const auto& g : golds) {
    BiasWordResult r{g.word, g.colors, std::nullopt, false};
    try {
      r.estimate = estimate_color(counts, g.word);
    } catch (const Error& e) {
      if (e.code() != Errc::UnseenWord && e.code() != Errc::NoColorEvidence) throw;
    }
    if (r.estimate) {
      r.correct = std::find(g.colors.begin(), g.colors.end(), *r.estimate) != g.colors.end();
      ++out.evaluated;
      if (r.correct) ++out.correct;
    } else {
      out.no_evidence.push_back(g.word);
    }
    out.words.push_back(std::move(r));
  }
  if (out.evaluated == 0) throw Error(Errc::EmptyList, "no gold word has color evidence");
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.evaluated);
  return out;
}

}  // namespace vlu
