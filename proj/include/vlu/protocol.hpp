// SPDX-License-Identifier: Apache-2.0
//
// Newline-delimited JSON provider protocol.
//
//   request  {"id":<int>,"op":<string>,...params}
//   success  {"id":<int>,"ok":true,...result}
//   failure  {"id":<int>,"ok":false,"error":"<Code>: [index <n>: ]<detail>"}
//
// Ops and their fields:
//   info          -> name, embedding_dim, has_mask_token, mask_token, max_tokens
//   embed         texts            -> vectors
//   mlm_logprobs  masked_text, candidates -> logprobs
//   token_count   text             -> count
//   sequence_nll  texts            -> nll
//   nli           premise, hypothesis -> p_contradiction, p_neutral, p_entailment
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vlu/error.hpp"
#include "vlu/provider.hpp"

namespace vlu {

using Json = nlohmann::ordered_json;

namespace op {
inline constexpr std::string_view kInfo = "info";
inline constexpr std::string_view kEmbed = "embed";
inline constexpr std::string_view kMlmLogprobs = "mlm_logprobs";
inline constexpr std::string_view kTokenCount = "token_count";
inline constexpr std::string_view kSequenceNll = "sequence_nll";
inline constexpr std::string_view kNli = "nli";
}  // namespace op

struct Request {
  std::int64_t id = 0;
  std::string op;
  Json params = Json::object();
};

struct Response {
  std::int64_t id = 0;
  bool ok = true;
  std::string error;
  Json result = Json::object();
};

std::string encode(const Request& request);
std::string encode(const Response& response);
/// ProtocolError on malformed lines.
Request decode_request(std::string_view line);
Response decode_response(std::string_view line);

/// Wire form of an error string and its inverse.
std::string format_wire_error(const Error& error);
Error parse_wire_error(std::string_view text);

/// Executes one request against a provider. Never throws: failures become
/// ok=false responses.
Response handle_request(ModelProvider& provider, const Request& request);

/// Bidirectional line transport. Not thread-safe.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(std::string_view line) = 0;
  /// nullopt at end of stream.
  virtual std::optional<std::string> recv_line() = 0;
};

/// Wraps a pair of iostreams (e.g. the process' own stdin/stdout).
std::unique_ptr<LineChannel> make_stream_channel(std::istream& in, std::ostream& out);
/// Launches `/bin/sh -c command` and talks over its stdin/stdout.
std::unique_ptr<LineChannel> spawn_stdio_channel(const std::string& command);
std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks a free port.
  explicit TcpListener(std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<LineChannel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Answers requests in arrival order until the channel closes.
/// Returns the number of requests served.
std::size_t serve(ModelProvider& provider, LineChannel& channel);

/// Client side of the protocol with request pipelining: any number of
/// requests may be outstanding; responses are matched by id.
class ProtocolClient {
 public:
  explicit ProtocolClient(std::unique_ptr<LineChannel> channel);

  std::int64_t submit(std::string_view op, Json params = Json::object());
  Response await(std::int64_t id);
  /// submit + await; throws the decoded vlu::Error on ok=false.
  Json call(std::string_view op, Json params = Json::object());

 private:
  std::unique_ptr<LineChannel> channel_;
  std::int64_t next_id_ = 1;
  std::map<std::int64_t, Response> parked_;
};

std::unique_ptr<ModelProvider> make_remote_provider(std::unique_ptr<LineChannel> channel);

/// Golden transcript: alternating request and expected response lines.
struct TranscriptReport {
  std::size_t exchanges = 0;
  std::vector<std::string> mismatches;
  bool passed() const noexcept { return mismatches.empty(); }
};

/// Replays the transcript's requests over `channel` and compares every
/// response against the recorded one. Floats compare within `float_tol`
/// (0 means exact); everything else must match exactly.
TranscriptReport replay_transcript(LineChannel& channel, std::istream& transcript, double float_tol);

/// Structural JSON comparison used by the transcript replay.
bool json_near(const Json& a, const Json& b, double float_tol);

}  // namespace vlu
