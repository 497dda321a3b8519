// SPDX-License-Identifier: Apache-2.0
#include "vlu/embedding_cache.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "vlu/error.hpp"

namespace vlu {

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  return read(in);
}

EmbeddingCache EmbeddingCache::read(std::istream& in) {
  EmbeddingCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      cache.insert(j.at("text_id").get<std::string>(), j.at("vector").get<EmbeddingVector>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, "embedding cache line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return cache;
}

void EmbeddingCache::write(std::ostream& out) const {
  for (const auto& [id, vec] : vectors_) {
    nlohmann::ordered_json j;
    j["text_id"] = id;
    j["vector"] = vec;
    out << j.dump() << '\n';
  }
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write embedding cache " + path.string());
  write(out);
}

const EmbeddingVector* EmbeddingCache::find(const std::string& text_id) const {
  const auto it = vectors_.find(text_id);
  return it == vectors_.end() ? nullptr : &it->second;
}

void EmbeddingCache::insert(const std::string& text_id, EmbeddingVector vector) {
  vectors_.insert_or_assign(text_id, std::move(vector));
}

std::vector<EmbeddingVector> EmbeddingCache::resolve(std::span<const std::string> texts, ModelProvider* provider,
                                                     std::size_t batch) {
  std::vector<std::string> missing;
  for (const auto& t : texts) {
    if (!find(t) && (missing.empty() || missing.back() != t)) missing.push_back(t);
  }
  if (!missing.empty()) {
    if (!provider) throw Error(Errc::ValidationError, "embedding cache lacks '" + missing.front() + "' and no provider is configured");
    for (std::size_t b = 0; b < missing.size(); b += batch) {
      const std::size_t e = std::min(b + batch, missing.size());
      std::vector<std::string> chunk(missing.begin() + static_cast<std::ptrdiff_t>(b),
                                     missing.begin() + static_cast<std::ptrdiff_t>(e));
      auto vecs = provider->embed(chunk);
      for (std::size_t i = 0; i < chunk.size(); ++i) insert(chunk[i], std::move(vecs[i]));
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(*find(t));
  return out;
}

std::optional<std::filesystem::path> default_cache_path(const std::string& provider_spec) {
  const char* dir = std::getenv("PROBE_CACHE_DIR");
  if (!dir || !*dir) return std::nullopt;
  std::string name;
  for (const char ch : provider_spec) {
    const bool safe = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                      ch == '_' || ch == '.';
    name.push_back(safe ? ch : '_');
  }
  return std::filesystem::path(dir) / (name + ".jsonl");
}

}  // namespace vlu
