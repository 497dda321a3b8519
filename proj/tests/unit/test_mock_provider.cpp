// SPDX-License-Identifier: Apache-2.0
// Expected values come from tests/oracles/mock_oracle.py, an independent
// Python implementation of the mock hash formulas.
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "vlu/error.hpp"
#include "vlu/hash.hpp"
#include "vlu/provider.hpp"
#include "vlu/provider_spec.hpp"

using namespace vlu;

namespace {

double norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("fnv1a64 and splitmix64 match the reference") {
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  SplitMix64 r(0);
  CHECK(r.next() == 0xe220a8397b1dcdafULL);
  CHECK(r.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(r.next() == 0x6c45d188009454fULL);
}

TEST_CASE("splitmix64 index stays in range and uniform draws in [0,1)") {
  SplitMix64 r(99);
  for (int i = 0; i < 10000; ++i) {
    CHECK(r.index(7) < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("mock info is the declared constant") {
  auto p = make_mock_provider({8, 1});
  const auto info = p->info();
  CHECK(info.name == "mock");
  CHECK(info.embedding_dim == 8);
  CHECK(info.has_mask_token);
  CHECK(info.mask_token == std::optional<std::string>("[MASK]"));
  CHECK(info.max_tokens == 64);
  const auto again = p->info();
  CHECK(again.name == info.name);
  CHECK(again.mask_token == info.mask_token);

  auto maskless = make_mock_provider({8, 1, false});
  CHECK_FALSE(maskless->info().has_mask_token);
  CHECK_FALSE(maskless->info().mask_token.has_value());
  CHECK(code_of([&] { maskless->mlm_logprobs("a [MASK]", std::vector<std::string>{"x"}); }) ==
        Errc::MaskUnavailable);
}

TEST_CASE("mock embeddings match the reference and are unit length") {
  auto p = make_mock_provider({8, 1});
  std::vector<std::string> texts{"a", "b", "a"};
  const auto v = p->embed(texts);
  REQUIRE(v.size() == 3);
  CHECK(v[0][0] == 0.3690267444919745);
  CHECK(v[1][0] == -0.23420287210988683);
  CHECK(v[0] == v[2]);
  CHECK(v[0] != v[1]);
  for (const auto& e : v) {
    CHECK(e.size() == 8);
    CHECK(std::abs(norm(e) - 1.0) < 1e-9);
  }

  std::vector<std::string> sentences{"I see the", "I see the bench", "I see the fun"};
  const auto s = p->embed(sentences);
  CHECK(std::abs(dot(s[0], s[1]) - 0.4041566219643776) < 1e-15);
  CHECK(std::abs(dot(s[0], s[2]) - -0.5016236828760043) < 1e-15);
}

TEST_CASE("mock embedding depends on dim and seed") {
  std::vector<std::string> t{"x"};
  auto a = make_mock_provider({4, 1})->embed(t)[0];
  auto b = make_mock_provider({4, 2})->embed(t)[0];
  CHECK(a.size() == 4);
  CHECK(a != b);
}

TEST_CASE("mock mlm, nll and nli match the reference") {
  auto p = make_mock_provider({8, 1});
  std::vector<std::string> cands{"bench"};
  const auto lp = p->mlm_logprobs("I see the [MASK]", cands);
  REQUIRE(lp.size() == 1);
  CHECK(lp[0] == -1.1287212077351183);

  std::vector<std::string> texts{"Alex giving Riley's file"};
  CHECK(p->sequence_nll(texts)[0] == 73.88918121464185);

  const auto probs = p->nli("a", "b");
  CHECK(probs.contradiction == doctest::Approx(0.38276558982661013).epsilon(1e-15));
  CHECK(probs.neutral == doctest::Approx(0.32120103726679483).epsilon(1e-15));
  CHECK(probs.entailment == doctest::Approx(0.2960333729065951).epsilon(1e-15));
  CHECK(std::abs(probs.contradiction + probs.neutral + probs.entailment - 1.0) < 1e-9);
  CHECK_NOTHROW(p->nli("b", "a").validate());
}

TEST_CASE("mock mlm values are bounded and order-aligned") {
  auto p = make_mock_provider({8, 3});
  std::vector<std::string> cands{"red", "green", "blue", "a"};
  const auto lp = p->mlm_logprobs("A [MASK] apple", cands);
  REQUIRE(lp.size() == cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    CHECK(lp[i] <= 0.0);
    CHECK(lp[i] >= -10.0);
    std::vector<std::string> one{cands[i]};
    CHECK(p->mlm_logprobs("A [MASK] apple", one)[0] == lp[i]);
  }
}

TEST_CASE("mock token counts are whitespace words") {
  auto p = make_mock_provider({});
  CHECK(p->token_count("saudi arabia") == 2);
  CHECK(p->token_count("a b") == p->token_count("a") + p->token_count("b"));
  CHECK(p->token_count("  spaced\tout\nwords ") == 3);
  CHECK(code_of([&] { p->token_count(""); }) == Errc::EmptyText);
}

TEST_CASE("mock error paths") {
  auto p = make_mock_provider({});
  std::string long_text;
  for (int i = 0; i < 65; ++i) long_text += "w ";
  std::vector<std::string> texts{"ok", long_text};
  try {
    p->embed(texts);
    FAIL("expected TooLong");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooLong);
    CHECK(e.index() == std::optional<std::size_t>(1));
  }
  CHECK(code_of([&] { p->sequence_nll(texts); }) == Errc::TooLong);
  std::vector<std::string> multi{"ok", "lady finger"};
  try {
    p->mlm_logprobs("a [MASK]", multi);
    FAIL("expected MultiTokenCandidate");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MultiTokenCandidate);
    CHECK(e.index() == std::optional<std::size_t>(1));
  }
  std::vector<std::string> one{"x"};
  CHECK(code_of([&] { p->mlm_logprobs("no mask", one); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { p->mlm_logprobs("[MASK] [MASK]", one); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { p->nli("", "b"); }) == Errc::EmptyText);
}

TEST_CASE("nll is in [0,100] and batch-of-one equals the batch") {
  auto p = make_mock_provider({8, 5});
  std::vector<std::string> texts{"one", "two three", "four five six"};
  const auto all = p->sequence_nll(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CHECK(all[i] >= 0.0);
    CHECK(all[i] <= 100.0);
    std::vector<std::string> single{texts[i]};
    CHECK(p->sequence_nll(single)[0] == all[i]);
  }
}

TEST_CASE("provider info and nli validation") {
  ProviderInfo bad{"x", 0, false, std::nullopt, 10};
  CHECK_THROWS_AS(bad.validate(), Error);
  ProviderInfo mismatch{"x", 4, true, std::nullopt, 10};
  CHECK_THROWS_AS(mismatch.validate(), Error);
  ProviderInfo good{"x", 4, false, std::nullopt, 10};
  CHECK_NOTHROW(good.validate());
  CHECK_THROWS_AS((NliProbs{0.5, 0.5, 0.5}.validate()), Error);
  CHECK_THROWS_AS((NliProbs{-0.1, 0.6, 0.5}.validate()), Error);
}

TEST_CASE("provider spec grammar") {
  auto m = ProviderSpec::parse("mock:dim=16,seed=7");
  const auto& cfg = std::get<MockConfig>(m.target);
  CHECK(cfg.dim == 16);
  CHECK(cfg.seed == 7);
  CHECK(cfg.mask);
  CHECK_FALSE(std::get<MockConfig>(ProviderSpec::parse("mock:mask=0").target).mask);
  CHECK(std::get<MockConfig>(ProviderSpec::parse("mock").target).dim == 8);
  auto s = ProviderSpec::parse("stdio:cmd=\"python serve.py --model x\"");
  CHECK(std::get<StdioSpec>(s.target).command == "python serve.py --model x");
  auto t = ProviderSpec::parse("tcp:localhost:9000");
  CHECK(std::get<TcpSpec>(t.target).host == "localhost");
  CHECK(std::get<TcpSpec>(t.target).port == 9000);
  for (const char* bad : {"", "mock:dim=0", "mock:dim=x", "mock:foo=1", "tcp:host", "tcp:host:0", "tcp:h:70000",
                          "stdio:cmd=", "http://x"}) {
    CAPTURE(bad);
    CHECK(code_of([&] { ProviderSpec::parse(bad); }) == Errc::ValidationError);
  }
  auto opened = ProviderSpec::parse("mock:dim=3").open();
  CHECK(opened->info().embedding_dim == 3);
}

TEST_CASE("error names round-trip") {
  for (auto code : {Errc::MissingArgument, Errc::TooLong, Errc::ProtocolError, Errc::IoError, Errc::NoColorEvidence}) {
    const auto name = errc_name(code);
    CHECK(errc_from_name(name) == std::optional<Errc>(code));
  }
  CHECK_FALSE(errc_from_name("NotACode").has_value());
  Error e(Errc::TooLong, "detail", 3);
  CHECK(std::string(e.what()) == "TooLong: detail");
  CHECK(e.detail() == "detail");
  CHECK(is_item_level(Errc::TooLong));
  CHECK_FALSE(is_item_level(Errc::ProviderError));
}
