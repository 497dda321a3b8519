// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>

#include "vlu/error.hpp"
#include "vlu/hash.hpp"
#include "vlu/provider.hpp"

namespace vlu {

void ProviderInfo::validate() const {
  if (embedding_dim < 1) throw Error(Errc::ProtocolError, "embedding_dim must be >= 1");
  if (max_tokens < 1) throw Error(Errc::ProtocolError, "max_tokens must be >= 1");
  if (has_mask_token != mask_token.has_value()) {
    throw Error(Errc::ProtocolError, "mask_token must be present iff has_mask_token");
  }
}

void NliProbs::validate() const {
  for (const double p : {contradiction, neutral, entailment}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::ProtocolError, "NLI probability outside [0,1]");
  }
  if (std::abs(contradiction + neutral + entailment - 1.0) > 1e-4) {
    throw Error(Errc::ProtocolError, "NLI probabilities do not sum to 1");
  }
}

std::size_t count_words(const std::string& text) {
  constexpr std::string_view kSpace = " \t\n\r\f\v";
  std::size_t count = 0;
  std::size_t pos = text.find_first_not_of(kSpace);
  while (pos != std::string::npos) {
    ++count;
    pos = text.find_first_of(kSpace, pos);
    if (pos == std::string::npos) break;
    pos = text.find_first_not_of(kSpace, pos);
  }
  return count;
}

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

class MockProvider final : public ModelProvider {
 public:
  explicit MockProvider(MockConfig config) : config_(config) {
    if (config_.dim < 1) throw Error(Errc::InvalidArgument, "mock dim must be >= 1");
  }

  ProviderInfo info() override {
    if (!config_.mask) return ProviderInfo{"mock", config_.dim, false, std::nullopt, kMockMaxTokens};
    return ProviderInfo{"mock", config_.dim, true, std::string{kMockMaskToken}, kMockMaxTokens};
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    check_lengths(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      SplitMix64 rng(config_.seed ^ fnv1a64(text));
      EmbeddingVector v(config_.dim);
      double norm2 = 0.0;
      for (auto& x : v) {
        x = rng.symmetric();
        norm2 += x * x;
      }
      const double norm = std::sqrt(norm2);
      for (auto& x : v) x /= norm;
      out.push_back(std::move(v));
    }
    return out;
  }

  std::vector<double> mlm_logprobs(const std::string& masked_text,
                                   std::span<const std::string> candidates) override {
    if (!config_.mask) throw Error(Errc::MaskUnavailable, "provider has no mask token");
    if (count_occurrences(masked_text, kMockMaskToken) != 1) {
      throw Error(Errc::InvalidArgument, "masked text must contain exactly one [MASK]");
    }
    check_length(masked_text, 0);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (count_words(candidates[i]) != 1) {
        throw Error(Errc::MultiTokenCandidate, "candidate " + std::to_string(i) + " is not a single token", i);
      }
      const auto h = fnv1a64(candidates[i], fnv1a64("\x1f", fnv1a64(masked_text)));
      SplitMix64 rng(config_.seed ^ h);
      out.push_back(-10.0 * rng.uniform());
    }
    return out;
  }

  std::size_t token_count(const std::string& text) override {
    const auto n = count_words(text);
    if (n == 0) throw Error(Errc::EmptyText, "token_count of empty text");
    return n;
  }

  std::vector<double> sequence_nll(std::span<const std::string> texts) override {
    check_lengths(texts);
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      SplitMix64 rng(config_.seed ^ fnv1a64(text, fnv1a64("nll\x1f")));
      out.push_back(100.0 * rng.uniform());
    }
    return out;
  }

  NliProbs nli(const std::string& premise, const std::string& hypothesis) override {
    if (premise.empty() || hypothesis.empty()) throw Error(Errc::EmptyText, "nli requires non-empty texts");
    const auto h = fnv1a64(hypothesis, fnv1a64("\x1f", fnv1a64(premise, fnv1a64("nli\x1f"))));
    SplitMix64 rng(config_.seed ^ h);
    std::array<double, 3> logits{rng.uniform(), rng.uniform(), rng.uniform()};
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& x : logits) {
      x = std::exp(x - top);
      sum += x;
    }
    return NliProbs{logits[0] / sum, logits[1] / sum, logits[2] / sum};
  }

 private:
  void check_length(const std::string& text, std::size_t index) const {
    if (count_words(text) > kMockMaxTokens) {
      throw Error(Errc::TooLong, "text " + std::to_string(index) + " exceeds max_tokens", index);
    }
  }

  void check_lengths(std::span<const std::string> texts) const {
    for (std::size_t i = 0; i < texts.size(); ++i) check_length(texts[i], i);
  }

  MockConfig config_;
};

}  // namespace

std::unique_ptr<ModelProvider> make_mock_provider(MockConfig config) {
  return std::make_unique<MockProvider>(config);
}

}  // namespace vlu
