#pragma once

#include <string>
#include <utility>
#include <vector>

namespace neutralsum::internal {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Blocking request against base_url ("http://host:port" or "https://...").
// Transport failures throw RemoteError: kTimeout for read/connect timeouts,
// kTransient for anything else. HTTP error statuses are returned, not thrown.
HttpResponse http_post_json(const std::string& base_url, const std::string& path,
                            const std::string& body, const HttpHeaders& headers, double timeout_s);
HttpResponse http_get(const std::string& base_url, const std::string& path, double timeout_s);

}  // namespace neutralsum::internal
