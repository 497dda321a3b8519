// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlu/provider.hpp"

namespace vlu {

/// JSONL embedding store, one `{"text_id": ..., "vector": [...]}` per line.
/// The text id is the embedded text itself.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;

  /// ParseError(line) on malformed rows; a missing file yields an empty cache.
  static EmbeddingCache load(const std::filesystem::path& path);
  static EmbeddingCache read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  const EmbeddingVector* find(const std::string& text_id) const;
  void insert(const std::string& text_id, EmbeddingVector vector);
  std::size_t size() const noexcept { return vectors_.size(); }

  /// Returns embeddings for all texts, asking `provider` (when given) for
  /// the missing ones in batches. ValidationError when a text is missing
  /// and there is no provider.
  std::vector<EmbeddingVector> resolve(std::span<const std::string> texts, ModelProvider* provider,
                                       std::size_t batch = 64);

 private:
  std::map<std::string, EmbeddingVector, std::less<>> vectors_;
};

/// `$PROBE_CACHE_DIR/<sanitized provider spec>.jsonl`, if the variable is set.
std::optional<std::filesystem::path> default_cache_path(const std::string& provider_spec);

}  // namespace vlu
