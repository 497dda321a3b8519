// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vlu {

inline constexpr std::string_view kSlotMarker = "[*]";
inline constexpr std::string_view kItemMarker = "<w>";
inline constexpr std::string_view kReviewMarker = "<s>";

/// What fills the completion slot when no candidate is inserted.
struct ProviderMask {
  friend bool operator==(const ProviderMask&, const ProviderMask&) = default;
};
struct RemoveSlot {
  friend bool operator==(const RemoveSlot&, const RemoveSlot&) = default;
};
struct Filler {
  std::string word;
  friend bool operator==(const Filler&, const Filler&) = default;
};
using SlotPolicy = std::variant<ProviderMask, RemoveSlot, Filler>;

/// "mask", "remove", or "filler:<word>".
SlotPolicy parse_slot_policy(std::string_view text);
std::string to_string(const SlotPolicy& policy);

enum class CandidateForm { Noun, Adjective };

/// Ordered, duplicate-free list of non-empty completions. Order defines
/// tie-breaking everywhere.
class CandidateSet {
 public:
  CandidateSet() = default;
  explicit CandidateSet(std::vector<std::string> candidates);

  const std::vector<std::string>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::string& operator[](std::size_t i) const { return values_[i]; }
  std::optional<std::size_t> index_of(std::string_view candidate) const;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;

 private:
  std::vector<std::string> values_;
};

class PromptTemplate {
 public:
  /// ValidationError unless `body` has exactly one `[*]`, at most one `<w>`
  /// and at most one `<s>`.
  explicit PromptTemplate(std::string body, SlotPolicy policy = RemoveSlot{},
                          CandidateForm form = CandidateForm::Noun,
                          std::optional<CandidateSet> candidates = std::nullopt);

  const std::string& body() const noexcept { return body_; }
  const SlotPolicy& slot_policy() const noexcept { return policy_; }
  CandidateForm candidate_form() const noexcept { return form_; }
  /// Per-prompt completions (e.g. Yes/No for sentiment prompts).
  const std::optional<CandidateSet>& candidates() const noexcept { return candidates_; }
  bool has_item() const noexcept;
  bool has_review() const noexcept;

  PromptTemplate with_policy(SlotPolicy policy) const;

 private:
  std::string body_;
  SlotPolicy policy_;
  CandidateForm form_;
  std::optional<CandidateSet> candidates_;
};

struct RenderArgs {
  std::optional<std::string> item;
  std::optional<std::string> slot_value;
  std::optional<std::string> review;
  /// The provider's mask token, if it has one.
  std::optional<std::string> mask_token;
};

/// Substitutes every marker. With no slot value the template's policy
/// decides: ProviderMask inserts `mask_token` (MaskUnavailable if absent),
/// RemoveSlot deletes the marker and collapses whitespace, Filler inserts
/// its word. MissingArgument when `<w>`/`<s>` have no value.
std::string render(const PromptTemplate& prompt, const RenderArgs& args);

/// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Plain-text prompt list: one template per line, `#` comments, optional
/// `;; cand1,cand2` (per-prompt candidates) or `;; @adjective` / `;; @noun`.
std::vector<PromptTemplate> parse_prompt_list(std::istream& in, const SlotPolicy& policy);
std::vector<PromptTemplate> load_prompt_file(const std::filesystem::path& path, const SlotPolicy& policy);

/// circle <-> circular, rectangle <-> rectangular, triangle <-> triangular.
/// UnknownShape otherwise.
std::string shape_adjective(std::string_view noun);
std::string shape_noun(std::string_view adjective);

}  // namespace vlu
