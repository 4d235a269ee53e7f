// SPDX-License-Identifier: Apache-2.0

#include "http_util.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "magv/error.hpp"

namespace magv::detail {

std::string post_json(const std::string& base_url, const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body, const RetryPolicy& policy) {
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0 && policy.backoff.count() > 0)
      std::this_thread::sleep_for(policy.backoff * static_cast<long>(attempt));

    httplib::Client client(base_url);
    client.set_connection_timeout(policy.timeout);
    client.set_read_timeout(policy.timeout);
    client.set_write_timeout(policy.timeout);

    const auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      last_error = "request to " + base_url + path + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + " from " + base_url + path + ": " +
                 res->body.substr(0, 200);
    if (res->status != 429 && res->status < 500) break;
  }
  throw TransportError(last_error);
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* value = std::getenv(name.c_str());
  return value == nullptr ? std::string() : std::string(value);
}

}  // namespace magv::detail
