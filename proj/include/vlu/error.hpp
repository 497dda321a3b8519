// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vlu {

/// Error categories shared by every module. The names double as the
/// prefix of error strings on the provider wire protocol.
enum class Errc {
  MissingArgument,
  MaskUnavailable,
  ZeroVector,
  MultiTokenCandidate,
  EmptyRow,
  PromptFailure,
  ProtocolError,
  ProviderError,
  TooLong,
  EmptyText,
  LengthMismatch,
  ZeroVariance,
  AllTied,
  EmptyGold,
  SingleClass,
  NonFiniteFeature,
  DimMismatch,
  TooFewSamples,
  ParseError,
  ScoreOutOfRange,
  UnknownColor,
  UnknownShape,
  UnseenWord,
  NoColorEvidence,
  EmptyList,
  DuplicateEntry,
  InvalidArgument,
  ValidationError,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;
std::optional<Errc> errc_from_name(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> index = std::nullopt);

  Errc code() const noexcept { return code_; }
  /// Offending element (candidate, text, line, ...) when the error names one.
  std::optional<std::size_t> index() const noexcept { return index_; }
  /// Message without the "Code: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::optional<std::size_t> index_;
  std::string detail_;
};

/// Errors that describe a single bad input rather than a broken session.
/// The task runner skips the offending item instead of aborting.
bool is_item_level(Errc code) noexcept;

}  // namespace vlu
