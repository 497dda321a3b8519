// SPDX-License-Identifier: Apache-2.0
#include "vlu/prompt.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <set>
#include <utility>

#include "vlu/error.hpp"

namespace vlu {
namespace {

std::size_t occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n";
  const auto b = s.find_first_not_of(kSpace);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(kSpace) - b + 1);
}

constexpr std::array<std::pair<std::string_view, std::string_view>, 3> kShapeForms{{
    {"rectangle", "rectangular"},
    {"circle", "circular"},
    {"triangle", "triangular"},
}};

}  // namespace

SlotPolicy parse_slot_policy(std::string_view text) {
  if (text == "mask") return ProviderMask{};
  if (text == "remove") return RemoveSlot{};
  if (text.starts_with("filler:") && text.size() > 7) return Filler{std::string(text.substr(7))};
  throw Error(Errc::ValidationError, "unknown slot policy '" + std::string(text) + "'");
}

std::string to_string(const SlotPolicy& policy) {
  if (std::holds_alternative<ProviderMask>(policy)) return "mask";
  if (std::holds_alternative<RemoveSlot>(policy)) return "remove";
  return "filler:" + std::get<Filler>(policy).word;
}

CandidateSet::CandidateSet(std::vector<std::string> candidates) : values_(std::move(candidates)) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].empty()) throw Error(Errc::ValidationError, "empty candidate", i);
    if (!seen.insert(values_[i]).second) {
      throw Error(Errc::DuplicateEntry, "duplicate candidate '" + values_[i] + "'", i);
    }
  }
}

std::optional<std::size_t> CandidateSet::index_of(std::string_view candidate) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == candidate) return i;
  }
  return std::nullopt;
}

PromptTemplate::PromptTemplate(std::string body, SlotPolicy policy, CandidateForm form,
                               std::optional<CandidateSet> candidates)
    : body_(std::move(body)), policy_(std::move(policy)), form_(form), candidates_(std::move(candidates)) {
  if (occurrences(body_, kSlotMarker) != 1) {
    throw Error(Errc::ValidationError, "template must contain exactly one [*]: '" + body_ + "'");
  }
  if (occurrences(body_, kItemMarker) > 1 || occurrences(body_, kReviewMarker) > 1) {
    throw Error(Errc::ValidationError, "template repeats an item or review marker: '" + body_ + "'");
  }
}

bool PromptTemplate::has_item() const noexcept { return body_.find(kItemMarker) != std::string::npos; }
bool PromptTemplate::has_review() const noexcept { return body_.find(kReviewMarker) != std::string::npos; }

PromptTemplate PromptTemplate::with_policy(SlotPolicy policy) const {
  PromptTemplate copy = *this;
  copy.policy_ = std::move(policy);
  return copy;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string render(const PromptTemplate& prompt, const RenderArgs& args) {
  if (prompt.has_item() && !args.item) throw Error(Errc::MissingArgument, "template needs an item for <w>");
  if (prompt.has_review() && !args.review) throw Error(Errc::MissingArgument, "template needs a review for <s>");

  const auto& policy = prompt.slot_policy();
  std::string_view slot_text;
  bool collapse = false;
  if (args.slot_value) {
    slot_text = *args.slot_value;
  } else if (std::holds_alternative<ProviderMask>(policy)) {
    if (!args.mask_token) throw Error(Errc::MaskUnavailable, "provider has no mask token");
    slot_text = *args.mask_token;
  } else if (const auto* filler = std::get_if<Filler>(&policy)) {
    slot_text = filler->word;
  } else {
    collapse = true;
  }

  // Single left-to-right pass so substituted values are never rescanned.
  const std::string_view body = prompt.body();
  std::string text;
  text.reserve(body.size() + 32);
  for (std::size_t i = 0; i < body.size();) {
    const auto rest = body.substr(i);
    if (rest.starts_with(kSlotMarker)) {
      text += slot_text;
      i += kSlotMarker.size();
    } else if (rest.starts_with(kItemMarker)) {
      text += *args.item;
      i += kItemMarker.size();
    } else if (rest.starts_with(kReviewMarker)) {
      text += *args.review;
      i += kReviewMarker.size();
    } else {
      text.push_back(body[i]);
      ++i;
    }
  }
  return collapse ? normalize_whitespace(text) : text;
}

std::vector<PromptTemplate> parse_prompt_list(std::istream& in, const SlotPolicy& policy) {
  std::vector<PromptTemplate> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    std::string_view body = stripped;
    std::optional<CandidateSet> candidates;
    CandidateForm form = CandidateForm::Noun;
    if (const auto sep = stripped.find(";;"); sep != std::string_view::npos) {
      body = trim(stripped.substr(0, sep));
      const auto tail = trim(stripped.substr(sep + 2));
      if (tail == "@adjective") {
        form = CandidateForm::Adjective;
      } else if (tail == "@noun") {
        form = CandidateForm::Noun;
      } else {
        std::vector<std::string> values;
        std::string_view rest = tail;
        while (true) {
          const auto comma = rest.find(',');
          values.emplace_back(trim(rest.substr(0, comma)));
          if (comma == std::string_view::npos) break;
          rest = rest.substr(comma + 1);
        }
        candidates = CandidateSet(std::move(values));
      }
    }
    try {
      prompts.emplace_back(std::string(body), policy, form, std::move(candidates));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, "prompt line " + std::to_string(line_no) + ": " + e.detail(), line_no);
    }
  }
  return prompts;
}

std::vector<PromptTemplate> load_prompt_file(const std::filesystem::path& path, const SlotPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open prompt file " + path.string());
  return parse_prompt_list(in, policy);
}

std::string shape_adjective(std::string_view noun) {
  for (const auto& [n, a] : kShapeForms) {
    if (n == noun) return std::string(a);
  }
  throw Error(Errc::UnknownShape, "unknown shape '" + std::string(noun) + "'");
}

std::string shape_noun(std::string_view adjective) {
  for (const auto& [n, a] : kShapeForms) {
    if (a == adjective) return std::string(n);
  }
  throw Error(Errc::UnknownShape, "unknown shape adjective '" + std::string(adjective) + "'");
}

}  // namespace vlu
