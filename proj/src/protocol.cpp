// SPDX-License-Identifier: Apache-2.0
#include "vlu/protocol.hpp"

#include <cmath>
#include <istream>

namespace vlu {
namespace {

Json parse_object(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ProtocolError, std::string("malformed line: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ProtocolError, "message is not a JSON object");
  if (!j.contains("id") || !j["id"].is_number_integer()) {
    throw Error(Errc::ProtocolError, "message lacks an integer id");
  }
  return j;
}

template <typename T>
T field(const Json& params, const char* name) {
  if (!params.contains(name)) throw Error(Errc::ProtocolError, std::string("missing field ") + name);
  try {
    return params.at(name).get<T>();
  } catch (const Json::exception&) {
    throw Error(Errc::ProtocolError, std::string("bad type for field ") + name);
  }
}

Json dispatch(ModelProvider& provider, const Request& request) {
  const auto& p = request.params;
  Json out = Json::object();
  if (request.op == op::kInfo) {
    const auto info = provider.info();
    out["name"] = info.name;
    out["embedding_dim"] = info.embedding_dim;
    out["has_mask_token"] = info.has_mask_token;
    out["mask_token"] = info.mask_token ? Json(*info.mask_token) : Json(nullptr);
    out["max_tokens"] = info.max_tokens;
  } else if (request.op == op::kEmbed) {
    const auto texts = field<std::vector<std::string>>(p, "texts");
    out["vectors"] = provider.embed(texts);
  } else if (request.op == op::kMlmLogprobs) {
    const auto masked = field<std::string>(p, "masked_text");
    const auto candidates = field<std::vector<std::string>>(p, "candidates");
    out["logprobs"] = provider.mlm_logprobs(masked, candidates);
  } else if (request.op == op::kTokenCount) {
    out["count"] = provider.token_count(field<std::string>(p, "text"));
  } else if (request.op == op::kSequenceNll) {
    out["nll"] = provider.sequence_nll(field<std::vector<std::string>>(p, "texts"));
  } else if (request.op == op::kNli) {
    const auto probs = provider.nli(field<std::string>(p, "premise"), field<std::string>(p, "hypothesis"));
    out["p_contradiction"] = probs.contradiction;
    out["p_neutral"] = probs.neutral;
    out["p_entailment"] = probs.entailment;
  } else {
    throw Error(Errc::ProtocolError, "unknown op '" + request.op + "'");
  }
  return out;
}

}  // namespace

std::string encode(const Request& request) {
  Json j = Json::object();
  j["id"] = request.id;
  j["op"] = request.op;
  for (const auto& [key, value] : request.params.items()) j[key] = value;
  return j.dump();
}

std::string encode(const Response& response) {
  Json j = Json::object();
  j["id"] = response.id;
  j["ok"] = response.ok;
  if (!response.ok) {
    j["error"] = response.error;
  } else {
    for (const auto& [key, value] : response.result.items()) j[key] = value;
  }
  return j.dump();
}

Request decode_request(std::string_view line) {
  Json j = parse_object(line);
  Request r;
  r.id = j["id"].get<std::int64_t>();
  if (!j.contains("op") || !j["op"].is_string()) throw Error(Errc::ProtocolError, "request lacks op");
  r.op = j["op"].get<std::string>();
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "op") r.params[key] = value;
  }
  return r;
}

Response decode_response(std::string_view line) {
  Json j = parse_object(line);
  Response r;
  r.id = j["id"].get<std::int64_t>();
  if (!j.contains("ok") || !j["ok"].is_boolean()) throw Error(Errc::ProtocolError, "response lacks ok");
  r.ok = j["ok"].get<bool>();
  if (!r.ok) {
    if (!j.contains("error") || !j["error"].is_string()) {
      throw Error(Errc::ProtocolError, "failure response lacks error string");
    }
    r.error = j["error"].get<std::string>();
  } else {
    for (const auto& [key, value] : j.items()) {
      if (key != "id" && key != "ok") r.result[key] = value;
    }
  }
  return r;
}

std::string format_wire_error(const Error& error) {
  std::string out{errc_name(error.code())};
  out += ": ";
  if (error.index()) out += "index " + std::to_string(*error.index()) + ": ";
  out += error.detail();
  return out;
}

Error parse_wire_error(std::string_view text) {
  const auto colon = text.find(": ");
  if (colon == std::string_view::npos) return Error(Errc::ProviderError, std::string(text));
  const auto code = errc_from_name(text.substr(0, colon));
  if (!code) return Error(Errc::ProviderError, std::string(text));
  auto rest = text.substr(colon + 2);
  std::optional<std::size_t> index;
  if (rest.starts_with("index ")) {
    const auto end = rest.find(": ");
    if (end != std::string_view::npos) {
      try {
        index = std::stoull(std::string(rest.substr(6, end - 6)));
        rest = rest.substr(end + 2);
      } catch (const std::exception&) {
        index.reset();
      }
    }
  }
  return Error(*code, std::string(rest), index);
}

Response handle_request(ModelProvider& provider, const Request& request) {
  Response response;
  response.id = request.id;
  try {
    response.result = dispatch(provider, request);
  } catch (const Error& e) {
    response.ok = false;
    response.error = format_wire_error(e);
  } catch (const std::exception& e) {
    response.ok = false;
    response.error = format_wire_error(Error(Errc::ProviderError, e.what()));
  }
  return response;
}

std::size_t serve(ModelProvider& provider, LineChannel& channel) {
  std::size_t served = 0;
  while (auto line = channel.recv_line()) {
    if (line->empty()) continue;
    Response response;
    try {
      response = handle_request(provider, decode_request(*line));
    } catch (const Error& e) {
      response.id = -1;
      response.ok = false;
      response.error = format_wire_error(e);
    }
    channel.send_line(encode(response));
    ++served;
  }
  return served;
}

ProtocolClient::ProtocolClient(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {}

std::int64_t ProtocolClient::submit(std::string_view op, Json params) {
  Request r{next_id_++, std::string(op), std::move(params)};
  channel_->send_line(encode(r));
  return r.id;
}

Response ProtocolClient::await(std::int64_t id) {
  if (auto it = parked_.find(id); it != parked_.end()) {
    Response r = std::move(it->second);
    parked_.erase(it);
    return r;
  }
  while (true) {
    auto line = channel_->recv_line();
    if (!line) throw Error(Errc::ProtocolError, "provider closed the connection");
    if (line->empty()) continue;
    Response r = decode_response(*line);
    if (r.id == id) return r;
    if (r.id < 0) throw parse_wire_error(r.error);
    parked_.emplace(r.id, std::move(r));
  }
}

Json ProtocolClient::call(std::string_view op, Json params) {
  Response r = await(submit(op, std::move(params)));
  if (!r.ok) throw parse_wire_error(r.error);
  return std::move(r.result);
}

bool json_near(const Json& a, const Json& b, double float_tol) {
  if (a.is_number() && b.is_number()) {
    if (a.is_number_float() || b.is_number_float()) {
      const double x = a.get<double>();
      const double y = b.get<double>();
      return float_tol == 0.0 ? x == y : std::abs(x - y) <= float_tol;
    }
    return a == b;
  }
  if (a.type() != b.type()) return false;
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_near(a[i], b[i], float_tol)) return false;
    }
    return true;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    for (const auto& [key, value] : a.items()) {
      if (!b.contains(key) || !json_near(value, b[key], float_tol)) return false;
    }
    return true;
  }
  return a == b;
}

TranscriptReport replay_transcript(LineChannel& channel, std::istream& transcript, double float_tol) {
  TranscriptReport report;
  std::string request_line;
  std::string expected_line;
  std::size_t line_no = 0;
  while (std::getline(transcript, request_line)) {
    ++line_no;
    if (request_line.empty()) continue;
    if (!std::getline(transcript, expected_line)) {
      report.mismatches.push_back("line " + std::to_string(line_no) + ": request without recorded response");
      break;
    }
    ++line_no;
    ++report.exchanges;
    channel.send_line(request_line);
    const auto actual_line = channel.recv_line();
    if (!actual_line) {
      report.mismatches.push_back("line " + std::to_string(line_no) + ": connection closed");
      break;
    }
    try {
      const Json expected = Json::parse(expected_line);
      const Json actual = Json::parse(*actual_line);
      if (!json_near(expected, actual, float_tol)) {
        report.mismatches.push_back("line " + std::to_string(line_no) + ": expected " + expected_line +
                                    " got " + *actual_line);
      }
    } catch (const Json::parse_error&) {
      report.mismatches.push_back("line " + std::to_string(line_no) + ": unparsable response " + *actual_line);
    }
  }
  return report;
}

}  // namespace vlu
