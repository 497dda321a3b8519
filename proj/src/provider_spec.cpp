// SPDX-License-Identifier: Apache-2.0
#include "vlu/provider_spec.hpp"

#include <charconv>

#include "vlu/error.hpp"
#include "vlu/protocol.hpp"

namespace vlu {
namespace {

std::uint64_t parse_uint(std::string_view s, const std::string& spec) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(Errc::ValidationError, "bad number '" + std::string(s) + "' in provider spec " + spec);
  }
  return v;
}

MockConfig parse_mock(std::string_view body, const std::string& spec) {
  MockConfig cfg;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = body.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::ValidationError, "expected key=value in " + spec);
    const auto key = item.substr(0, eq);
    const auto value = parse_uint(item.substr(eq + 1), spec);
    if (key == "dim") {
      if (value < 1) throw Error(Errc::ValidationError, "mock dim must be >= 1");
      cfg.dim = static_cast<std::size_t>(value);
    } else if (key == "seed") {
      cfg.seed = value;
    } else if (key == "mask") {
      if (value > 1) throw Error(Errc::ValidationError, "mock mask must be 0 or 1");
      cfg.mask = value == 1;
    } else {
      throw Error(Errc::ValidationError, "unknown mock option '" + std::string(key) + "'");
    }
    body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
  }
  return cfg;
}

}  // namespace

ProviderSpec ProviderSpec::parse(const std::string& text) {
  ProviderSpec spec;
  spec.text = text;
  const std::string_view s = text;
  if (s == "mock") {
    spec.target = MockConfig{};
  } else if (s.starts_with("mock:")) {
    spec.target = parse_mock(s.substr(5), text);
  } else if (s.starts_with("stdio:cmd=")) {
    auto cmd = s.substr(10);
    if (cmd.size() >= 2 && cmd.front() == '"' && cmd.back() == '"') cmd = cmd.substr(1, cmd.size() - 2);
    if (cmd.empty()) throw Error(Errc::ValidationError, "empty stdio command");
    spec.target = StdioSpec{std::string(cmd)};
  } else if (s.starts_with("tcp:")) {
    const auto rest = s.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw Error(Errc::ValidationError, "expected tcp:HOST:PORT, got " + text);
    }
    const auto port = parse_uint(rest.substr(colon + 1), text);
    if (port == 0 || port > 65535) throw Error(Errc::ValidationError, "port out of range in " + text);
    spec.target = TcpSpec{std::string(rest.substr(0, colon)), static_cast<std::uint16_t>(port)};
  } else {
    throw Error(Errc::ValidationError, "unrecognized provider spec '" + text + "'");
  }
  return spec;
}

std::unique_ptr<ModelProvider> ProviderSpec::open() const {
  if (const auto* mock = std::get_if<MockConfig>(&target)) return make_mock_provider(*mock);
  if (const auto* stdio = std::get_if<StdioSpec>(&target)) {
    return make_remote_provider(spawn_stdio_channel(stdio->command));
  }
  const auto& tcp = std::get<TcpSpec>(target);
  return make_remote_provider(connect_tcp_channel(tcp.host, tcp.port));
}

}  // namespace vlu
