#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "haystack/judge.hpp"

namespace haystack {

namespace {

// One client per request: calls from different worker threads never share a
// connection.
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {
    const bool has_scheme = base_url_.rfind("http://", 0) == 0 || base_url_.rfind("https://", 0) == 0;
    httplib::Client probe(base_url_);
    if (!has_scheme || !probe.is_valid()) throw std::invalid_argument("invalid judge endpoint: " + base_url_);
  }

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::multimap<std::string, std::string>& headers,
                    std::chrono::milliseconds timeout) override {
    httplib::Client client(base_url_);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (httplib::detail::compare_case_ignore(k, "Content-Type")) content_type = v;
      else h.emplace(k, v);
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) throw TransportError("POST " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  std::string base_url_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url) {
  return std::make_unique<HttplibTransport>(base_url);
}

}  // namespace haystack
