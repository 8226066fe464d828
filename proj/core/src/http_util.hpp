#pragma once

#include <memory>
#include <string>

#include <httplib.h>

#include "lensloop/error.hpp"

namespace lensloop::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // may be empty
};

inline Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return Url{url, ""};
  return Url{url.substr(0, path_start), url.substr(path_start)};
}

inline std::unique_ptr<httplib::Client> make_client(const Url& url, int timeout_seconds) {
  auto client = std::make_unique<httplib::Client>(url.origin);
  client->set_connection_timeout(timeout_seconds, 0);
  client->set_read_timeout(timeout_seconds, 0);
  client->set_write_timeout(timeout_seconds, 0);
  return client;
}

}  // namespace lensloop::http
