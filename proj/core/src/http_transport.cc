#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "http_transport.h"

#include <chrono>

#include "neutralsum/error.h"

namespace neutralsum::internal {
namespace {

httplib::Client make_client(const std::string& base_url, double timeout_s) {
  httplib::Client cli(base_url);
  if (!cli.is_valid()) {
    throw RemoteError(RemoteError::Kind::kProtocol, "invalid endpoint url '" + base_url + "'");
  }
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(timeout_s));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

HttpResponse unwrap(const httplib::Result& res, const std::string& url) {
  if (!res) {
    const httplib::Error err = res.error();
    const std::string what = url + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw RemoteError(RemoteError::Kind::kTimeout, what);
    }
    throw RemoteError(RemoteError::Kind::kTransient, what);
  }
  return {res->status, res->body};
}

}  // namespace

HttpResponse http_post_json(const std::string& base_url, const std::string& path,
                            const std::string& body, const HttpHeaders& headers, double timeout_s) {
  httplib::Client cli = make_client(base_url, timeout_s);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  return unwrap(cli.Post(path, h, body, "application/json"), base_url + path);
}

HttpResponse http_get(const std::string& base_url, const std::string& path, double timeout_s) {
  httplib::Client cli = make_client(base_url, timeout_s);
  return unwrap(cli.Get(path), base_url + path);
}

}  // namespace neutralsum::internal
