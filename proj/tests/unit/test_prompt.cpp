// SPDX-License-Identifier: Apache-2.0
#include <functional>
#include <sstream>
#include <string>

#include "doctest.h"
#include "vlu/error.hpp"
#include "vlu/prompt.hpp"

using namespace vlu;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("render examples") {
  PromptTemplate color("A picture of a [*] <w>");
  CHECK(render(color, {.item = "banana", .slot_value = "yellow"}) == "A picture of a yellow banana");
  CHECK(render(color, {.item = "banana"}) == "A picture of a banana");
  PromptTemplate cities("which is older saudi arabia or [*]?", Filler{"place"});
  CHECK(render(cities, {}) == "which is older saudi arabia or place?");
  PromptTemplate masked("I see the [*]", ProviderMask{});
  CHECK(render(masked, {.mask_token = "[MASK]"}) == "I see the [MASK]");
  CHECK(code_of([&] { render(masked, {}); }) == Errc::MaskUnavailable);
  CHECK(code_of([&] { render(color, {.slot_value = "red"}); }) == Errc::MissingArgument);
  PromptTemplate review("<s> The film was [*]");
  CHECK(render(review, {.slot_value = "good", .review = "Fine acting."}) == "Fine acting. The film was good");
  CHECK(code_of([&] { render(review, {.slot_value = "good"}); }) == Errc::MissingArgument);
}

TEST_CASE("remove-slot rendering never leaves doubled spaces") {
  for (const char* body : {"[*] <w>", "The normal color of a <w> is [*]", "A  [*]   <w>  ", "<w> usually has a [*] color"}) {
    PromptTemplate t(body);
    const auto out = render(t, {.item = "apple"});
    CAPTURE(out);
    CHECK(out.find("  ") == std::string::npos);
    CHECK(out.front() != ' ');
    CHECK(out.back() != ' ');
  }
}

TEST_CASE("substituted values are not rescanned for markers") {
  PromptTemplate t("A [*] <w>");
  CHECK(render(t, {.item = "[*] <s>", .slot_value = "<w>"}) == "A <w> [*] <s>");
}

TEST_CASE("template validation") {
  CHECK(code_of([] { PromptTemplate("no slot"); }) == Errc::ValidationError);
  CHECK(code_of([] { PromptTemplate("[*] [*]"); }) == Errc::ValidationError);
  CHECK(code_of([] { PromptTemplate("[*] <w> <w>"); }) == Errc::ValidationError);
  CHECK(code_of([] { PromptTemplate("[*] <s> <s>"); }) == Errc::ValidationError);
  PromptTemplate ok("[*] <w>");
  CHECK(ok.has_item());
  CHECK_FALSE(ok.has_review());
  CHECK(std::holds_alternative<ProviderMask>(ok.with_policy(ProviderMask{}).slot_policy()));
}

TEST_CASE("candidate sets are unique and ordered") {
  CandidateSet c({"red", "green", "blue"});
  CHECK(c.size() == 3);
  CHECK(c.index_of("green") == std::optional<std::size_t>(1));
  CHECK_FALSE(c.index_of("pink").has_value());
  CHECK(code_of([] { CandidateSet({"a", "b", "a"}); }) == Errc::DuplicateEntry);
  CHECK(code_of([] { CandidateSet({"a", ""}); }) == Errc::ValidationError);
}

TEST_CASE("slot policy strings") {
  CHECK(std::holds_alternative<ProviderMask>(parse_slot_policy("mask")));
  CHECK(std::holds_alternative<RemoveSlot>(parse_slot_policy("remove")));
  const auto f = parse_slot_policy("filler:place");
  REQUIRE(std::holds_alternative<Filler>(f));
  CHECK(std::get<Filler>(f).word == "place");
  CHECK(to_string(f) == "filler:place");
  CHECK(code_of([] { parse_slot_policy("filler:"); }) == Errc::ValidationError);
  CHECK(code_of([] { parse_slot_policy("blank"); }) == Errc::ValidationError);
}

TEST_CASE("prompt list parsing") {
  std::istringstream in(
      "# comment\n"
      "\n"
      "A [*] <w>\n"
      "<s> Is this review positive? [*] ;; Yes,No\n"
      "A [*] shaped <w> ;; @adjective\n"
      "A photo of a [*] <w> ;; @noun\n");
  const auto prompts = parse_prompt_list(in, RemoveSlot{});
  REQUIRE(prompts.size() == 4);
  CHECK(prompts[0].body() == "A [*] <w>");
  REQUIRE(prompts[1].candidates().has_value());
  CHECK(prompts[1].candidates()->values() == std::vector<std::string>{"Yes", "No"});
  CHECK(prompts[2].candidate_form() == CandidateForm::Adjective);
  CHECK(prompts[3].candidate_form() == CandidateForm::Noun);
  std::istringstream bad("fine [*]\nbroken\n");
  try {
    parse_prompt_list(bad, RemoveSlot{});
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(e.index() == std::optional<std::size_t>(2));
  }
}

TEST_CASE("bundled prompt files") {
  const std::string dir = VLU_PROMPT_DIR;
  CHECK(load_prompt_file(dir + "/concreteness.txt", RemoveSlot{}).size() == 9);
  CHECK(load_prompt_file(dir + "/color.txt", RemoveSlot{}).size() == 10);
  const auto nouns = load_prompt_file(dir + "/shape_noun.txt", RemoveSlot{});
  const auto adjs = load_prompt_file(dir + "/shape_adjective.txt", RemoveSlot{});
  CHECK(nouns.size() == 10);
  CHECK(adjs.size() == 10);
  for (const auto& p : adjs) CHECK(p.candidate_form() == CandidateForm::Adjective);
  const auto sentiment = load_prompt_file(dir + "/sentiment.txt", RemoveSlot{});
  CHECK(sentiment.size() == 10);
  for (const auto& p : sentiment) {
    CHECK(p.has_review());
    REQUIRE(p.candidates().has_value());
    CHECK(p.candidates()->size() == 2);
  }
  CHECK(code_of([&] { load_prompt_file(dir + "/missing.txt", RemoveSlot{}); }) == Errc::IoError);
}

TEST_CASE("shape adjective mapping is a bijection") {
  for (const char* n : {"circle", "rectangle", "triangle"}) CHECK(shape_noun(shape_adjective(n)) == n);
  CHECK(shape_adjective("circle") == "circular");
  CHECK(shape_adjective("rectangle") == "rectangular");
  CHECK(shape_adjective("triangle") == "triangular");
  CHECK(code_of([] { shape_adjective("oval"); }) == Errc::UnknownShape);
  CHECK(code_of([] { shape_noun("oval"); }) == Errc::UnknownShape);
}

TEST_CASE("whitespace normalization") {
  CHECK(normalize_whitespace("  a \t b\n c  ") == "a b c");
  CHECK(normalize_whitespace("") == "");
}
