// SPDX-License-Identifier: Apache-2.0
#include "vlu/error.hpp"

#include <array>
#include <utility>

namespace vlu {
namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 29> kNames{{
    {Errc::MissingArgument, "MissingArgument"},
    {Errc::MaskUnavailable, "MaskUnavailable"},
    {Errc::ZeroVector, "ZeroVector"},
    {Errc::MultiTokenCandidate, "MultiTokenCandidate"},
    {Errc::EmptyRow, "EmptyRow"},
    {Errc::PromptFailure, "PromptFailure"},
    {Errc::ProtocolError, "ProtocolError"},
    {Errc::ProviderError, "ProviderError"},
    {Errc::TooLong, "TooLong"},
    {Errc::EmptyText, "EmptyText"},
    {Errc::LengthMismatch, "LengthMismatch"},
    {Errc::ZeroVariance, "ZeroVariance"},
    {Errc::AllTied, "AllTied"},
    {Errc::EmptyGold, "EmptyGold"},
    {Errc::SingleClass, "SingleClass"},
    {Errc::NonFiniteFeature, "NonFiniteFeature"},
    {Errc::DimMismatch, "DimMismatch"},
    {Errc::TooFewSamples, "TooFewSamples"},
    {Errc::ParseError, "ParseError"},
    {Errc::ScoreOutOfRange, "ScoreOutOfRange"},
    {Errc::UnknownColor, "UnknownColor"},
    {Errc::UnknownShape, "UnknownShape"},
    {Errc::UnseenWord, "UnseenWord"},
    {Errc::NoColorEvidence, "NoColorEvidence"},
    {Errc::EmptyList, "EmptyList"},
    {Errc::DuplicateEntry, "DuplicateEntry"},
    {Errc::InvalidArgument, "InvalidArgument"},
    {Errc::ValidationError, "ValidationError"},
    {Errc::IoError, "IoError"},
}};

std::string compose(Errc code, const std::string& message) {
  std::string out{errc_name(code)};
  out += ": ";
  out += message;
  return out;
}

}  // namespace

std::string_view errc_name(Errc code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<Errc> errc_from_name(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> index)
    : std::runtime_error(compose(code, message)), code_(code), index_(index), detail_(message) {}

bool is_item_level(Errc code) noexcept {
  switch (code) {
    case Errc::MissingArgument:
    case Errc::MaskUnavailable:
    case Errc::ZeroVector:
    case Errc::MultiTokenCandidate:
    case Errc::TooLong:
    case Errc::EmptyText:
    case Errc::EmptyRow:
      return true;
    default:
      return false;
  }
}

}  // namespace vlu
