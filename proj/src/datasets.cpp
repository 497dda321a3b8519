// SPDX-License-Identifier: Apache-2.0
#include "vlu/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"

#include "vlu/error.hpp"
#include "vlu/hash.hpp"

namespace vlu {
namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return in;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
}

// Calls fn(object, line_number) for each non-blank line; counts input_count.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, LoadReport& report, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!obj.is_object()) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": not an object", line_no);
    }
    ++report.input_count;
    try {
      fn(obj, line_no);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
}

std::string str_field(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": missing string field '" + key + "'",
                line_no);
  }
  return it->get<std::string>();
}

bool has_inner_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
}

bool is_basic_color(std::string_view c) {
  return std::find(kBasicColors.begin(), kBasicColors.end(), c) != kBasicColors.end();
}

// Token count under every provider is exactly one.
bool single_token_all(const std::string& word, ProviderList providers) {
  for (auto* p : providers) {
    try {
      if (p->token_count(word) != 1) return false;
    } catch (const Error& e) {
      if (e.code() == Errc::EmptyText || e.code() == Errc::TooLong) return false;
      throw;
    }
  }
  return true;
}

std::string fill_slot(const std::string& text, const std::string& answer) {
  const auto pos = text.find("[*]");
  if (pos == std::string::npos) return text;
  std::string out = text;
  out.replace(pos, 3, answer);
  return out;
}

}  // namespace

std::size_t LoadReport::dropped_total() const noexcept {
  std::size_t total = 0;
  for (const auto& [reason, n] : dropped) total += n;
  return total;
}

ColorDataset parse_color_dataset(std::string_view text) {
  if (text == "ctd" || text == "CTD") return ColorDataset::CTD;
  if (text == "ncd" || text == "NCD") return ColorDataset::NCD;
  throw Error(Errc::ValidationError, "unknown color dataset '" + std::string(text) + "'");
}

std::size_t length_limit(ProviderList providers) {
  std::size_t limit = std::numeric_limits<std::size_t>::max();
  for (auto* p : providers) limit = std::min<std::size_t>(limit, p->info().max_tokens);
  return limit;
}

bool fits_all(const std::string& text, ProviderList providers, std::size_t limit) {
  for (auto* p : providers) {
    try {
      if (p->token_count(text) > limit) return false;
    } catch (const Error& e) {
      if (e.code() == Errc::TooLong) return false;
      throw;
    }
  }
  return true;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t begin, std::size_t end) {
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end > begin) out.emplace_back(text.substr(begin, end - begin));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch != '.' && ch != '!' && ch != '?') continue;
    if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      flush(start, i + 1);
      start = i + 1;
    }
  }
  flush(start, text.size());
  return out;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r\n");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r\n");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::vector<std::string>> cities_equivalence() {
  return {std::vector<std::string>(kUsEquivalents.begin(), kUsEquivalents.end())};
}

Loaded<ConcretenessRecord> load_concreteness(const std::filesystem::path& path) {
  Loaded<ConcretenessRecord> out;
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    ConcretenessRecord rec;
    rec.word = str_field(obj, "word", line_no);
    rec.pos = str_field(obj, "pos", line_no);
    if (!obj.contains("score") || !obj["score"].is_number()) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": missing numeric field 'score'", line_no);
    }
    rec.score = obj["score"].get<double>();
    if (!(rec.score >= 1.0 && rec.score <= 5.0)) {
      throw Error(Errc::ScoreOutOfRange, "line " + std::to_string(line_no) + ": score outside [1,5]", line_no);
    }
    if (rec.word.empty() || has_inner_space(rec.word)) {
      out.report.drop("multiword");
    } else if (rec.pos != "Noun") {
      out.report.drop("not_noun");
    } else {
      out.records.push_back(std::move(rec));
      ++out.report.kept;
    }
  });
  return out;
}

Loaded<ColorRecord> load_color(const std::filesystem::path& path, ColorDataset dataset) {
  Loaded<ColorRecord> out;
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    ColorRecord rec;
    rec.word = str_field(obj, "word", line_no);
    if (!obj.contains("colors") || !obj["colors"].is_array()) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": missing array field 'colors'", line_no);
    }
    for (const auto& c : obj["colors"]) {
      auto color = c.get<std::string>();
      if (dataset == ColorDataset::NCD && color == "purple") continue;
      if (!is_basic_color(color)) throw Error(Errc::UnknownColor, "unknown color '" + color + "'", line_no);
      if (std::find(rec.colors.begin(), rec.colors.end(), color) == rec.colors.end()) {
        rec.colors.push_back(std::move(color));
      }
    }
    if (rec.colors.empty()) {
      out.report.drop(dataset == ColorDataset::NCD ? "purple_only" : "no_colors");
      return;
    }
    out.records.push_back(std::move(rec));
    ++out.report.kept;
  });
  return out;
}

Loaded<ShapeRecord> load_shapeit(const std::filesystem::path& path) {
  Loaded<ShapeRecord> out;
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    ShapeRecord rec{str_field(obj, "phrase", line_no), str_field(obj, "shape", line_no)};
    if (std::find(kShapes.begin(), kShapes.end(), rec.shape) == kShapes.end()) {
      throw Error(Errc::UnknownShape, "unknown shape '" + rec.shape + "'", line_no);
    }
    out.records.push_back(std::move(rec));
    ++out.report.kept;
  });
  return out;
}

void save_shapeit(const std::filesystem::path& path, std::span<const ShapeRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["phrase"] = r.phrase;
    obj["shape"] = r.shape;
    os << obj.dump() << '\n';
  }
  if (!os) throw Error(Errc::IoError, "write failed: " + path.string());
}

Loaded<ClozeQuestion> load_cities(const std::filesystem::path& path, ProviderList providers) {
  Loaded<ClozeQuestion> out;
  std::vector<std::string> pool;
  std::set<std::string> seen;
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    ClozeQuestion q;
    q.text = str_field(obj, "question", line_no);
    q.answer = str_field(obj, "answer", line_no);
    if (q.text.find("[*]") == std::string::npos) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": question lacks a [*] slot", line_no);
    }
    if (!single_token_all(q.answer, providers)) {
      out.report.drop("multi_token_answer");
      return;
    }
    if (seen.insert(q.answer).second) pool.push_back(q.answer);
    out.records.push_back(std::move(q));
    ++out.report.kept;
  });
  const CandidateSet shared(pool);
  for (auto& q : out.records) q.candidate_pool = shared;
  return out;
}

Loaded<CbtItem> load_cbt(const std::filesystem::path& path, ProviderList providers) {
  Loaded<CbtItem> out;
  const auto limit = length_limit(providers);
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    CbtItem item;
    item.sentence = str_field(obj, "sentence", line_no);
    item.answer = str_field(obj, "answer", line_no);
    item.pos_group = str_field(obj, "pos", line_no);
    if (!obj.contains("candidates") || !obj["candidates"].is_array()) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": missing array field 'candidates'",
                  line_no);
    }
    auto cands = obj["candidates"].get<std::vector<std::string>>();
    if (cands.size() != 10) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": expected 10 candidates", line_no);
    }
    item.candidates = CandidateSet(std::move(cands));
    if (!item.candidates.index_of(item.answer)) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": answer not among candidates", line_no);
    }
    if (item.sentence.find("[*]") == std::string::npos) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": sentence lacks a [*] slot", line_no);
    }
    if (item.pos_group != "N" && item.pos_group != "V" && item.pos_group != "P") {
      out.report.drop("pos_group");
      return;
    }
    if (!fits_all(fill_slot(item.sentence, item.answer), providers, limit)) {
      out.report.drop("too_long");
      return;
    }
    if (!single_token_all(item.answer, providers)) {
      out.report.drop("multi_token_answer");
      return;
    }
    out.records.push_back(std::move(item));
    ++out.report.kept;
  });
  return out;
}

Loaded<ReviewRecord> load_imdb(const std::filesystem::path& path, std::uint64_t seed, ProviderList providers) {
  Loaded<ReviewRecord> out;
  const auto limit = length_limit(providers);
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    ReviewRecord rec;
    rec.review_id = obj.contains("review_id") && obj["review_id"].is_number_integer()
                        ? std::to_string(obj["review_id"].get<long long>())
                        : str_field(obj, "review_id", line_no);
    const auto text = str_field(obj, "text", line_no);
    rec.label = str_field(obj, "label", line_no);
    if (rec.label != "positive" && rec.label != "negative") {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": label must be positive|negative",
                  line_no);
    }
    const auto sentences = split_sentences(text);
    if (sentences.empty()) {
      out.report.drop("empty");
      return;
    }
    SplitMix64 rng(seed ^ fnv1a64(rec.review_id));
    rec.sentence = sentences[rng.index(sentences.size())];
    if (!fits_all(rec.sentence, providers, limit)) {
      out.report.drop("too_long");
      return;
    }
    out.records.push_back(std::move(rec));
    ++out.report.kept;
  });
  return out;
}

Loaded<NliPair> load_mnli(const std::filesystem::path& path) {
  Loaded<NliPair> out;
  for_each_record(path, out.report, [&](const json& obj, std::size_t line_no) {
    NliPair pair{str_field(obj, "premise", line_no), str_field(obj, "hypothesis", line_no), 0};
    const auto label = str_field(obj, "label", line_no);
    if (label == "neutral") {
      out.report.drop("neutral");
      return;
    }
    if (label == "contradiction") {
      pair.label = 0;
    } else if (label == "entailment") {
      pair.label = 1;
    } else {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown NLI label '" + label + "'",
                  line_no);
    }
    out.records.push_back(std::move(pair));
    ++out.report.kept;
  });
  return out;
}

std::vector<std::string> single_token_filter(std::span<const std::string> words, ProviderList providers) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (single_token_all(w, providers)) out.push_back(w);
  }
  return out;
}

}  // namespace vlu
