#include "sketchplay/recognition.hpp"

#include <httplib.h>

#include <cstdlib>
#include <regex>

namespace sketchplay::recognition {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::RemoteUnavailable, "unsupported endpoint URL \"" + url + "\"");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

}  // namespace

EndpointConfig EndpointConfig::from_environment() {
  EndpointConfig c;
  if (const char* url = std::getenv("SKETCHPLAY_INFER_URL")) c.url = url;
  if (const char* token = std::getenv("SKETCHPLAY_INFER_TOKEN")) c.token = token;
  return c;
}

InferenceResponse RemoteClient::send(const InferenceRequest& request) const {
  const ParsedUrl target = parse_url(config_.url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(config_.connect_timeout);
  client.set_read_timeout(config_.read_timeout);
  client.set_write_timeout(config_.read_timeout);

  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

  const auto res = client.Post(target.path, headers, build_request_payload(request), "application/json");
  if (!res) {
    throw Error(ErrorCode::RemoteUnavailable,
                config_.url + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::RemoteUnavailable,
                config_.url + ": HTTP " + std::to_string(res->status));
  }
  return parse_response(res->body);
}

}  // namespace sketchplay::recognition
