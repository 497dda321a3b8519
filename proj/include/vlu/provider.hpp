// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vlu {

struct ProviderInfo {
  std::string name;
  std::size_t embedding_dim = 1;
  bool has_mask_token = false;
  std::optional<std::string> mask_token;
  std::size_t max_tokens = 1;

  /// Throws ProtocolError when the fields violate the declared invariants.
  void validate() const;

  friend bool operator==(const ProviderInfo&, const ProviderInfo&) = default;
};

using EmbeddingVector = std::vector<double>;

struct NliProbs {
  double contradiction = 0.0;
  double neutral = 0.0;
  double entailment = 0.0;

  void validate() const;
};

/// Abstraction over a text encoder and its auxiliary heads.
///
/// Implementations report failures as vlu::Error with the codes named in
/// each method. A provider instance is owned by one logical client; use
/// several instances for parallel work.
class ModelProvider {
 public:
  virtual ~ModelProvider() = default;

  virtual ProviderInfo info() = 0;

  /// Pooled embeddings, order-aligned with `texts`. TooLong(index) when a
  /// text exceeds max_tokens.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;

  /// Log-probability of each single-token candidate at the mask position.
  /// MaskUnavailable, MultiTokenCandidate(index).
  virtual std::vector<double> mlm_logprobs(const std::string& masked_text,
                                           std::span<const std::string> candidates) = 0;

  virtual std::size_t token_count(const std::string& text) = 0;

  /// Total negative log-likelihood of each text under a causal LM.
  virtual std::vector<double> sequence_nll(std::span<const std::string> texts) = 0;

  virtual NliProbs nli(const std::string& premise, const std::string& hypothesis) = 0;
};

struct MockConfig {
  std::size_t dim = 8;
  std::uint64_t seed = 1;
  /// false emulates an encoder without a mask token.
  bool mask = true;
};

/// Deterministic offline provider.
///
/// * embed: components are uniform[-1,1) draws of a splitmix64 stream seeded
///   with `seed ^ fnv1a64(text)`, then L2-normalized.
/// * mlm_logprobs: `-10 * u`, u the first uniform[0,1) draw of the stream
///   seeded with `seed ^ fnv1a64(masked_text + "\x1f" + candidate)`.
/// * sequence_nll: `100 * u` from `seed ^ fnv1a64("nll\x1f" + text)`.
/// * nli: softmax of three draws from
///   `seed ^ fnv1a64("nli\x1f" + premise + "\x1f" + hypothesis)`, in
///   (contradiction, neutral, entailment) order.
/// * token_count: number of whitespace-delimited words.
/// * with `mask = false`, info reports no mask token and mlm_logprobs throws
///   MaskUnavailable.
///
/// Stateless and safe to share across threads.
std::unique_ptr<ModelProvider> make_mock_provider(MockConfig config);

inline constexpr std::size_t kMockMaxTokens = 64;
inline constexpr const char* kMockMaskToken = "[MASK]";

/// Counts whitespace-delimited words (ASCII whitespace).
std::size_t count_words(const std::string& text);

}  // namespace vlu
