// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

namespace magv::detail {

/// Caps concurrent requests; acquire() blocks while `limit` are in flight.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit)
      : slots_(static_cast<std::ptrdiff_t>(limit == 0 ? 1 : limit)) {}

  class Slot {
   public:
    explicit Slot(InFlightLimiter& owner) : owner_(owner) { owner_.slots_.acquire(); }
    ~Slot() { owner_.slots_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimiter& owner_;
  };

  Slot acquire() { return Slot(*this); }

 private:
  std::counting_semaphore<4096> slots_;
};

struct RetryPolicy {
  std::size_t max_retries = 2;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{60};
};

/// POSTs a JSON body and returns the response body of a 2xx reply.
/// Connection failures, 429 and 5xx are retried up to max_retries times with
/// linear backoff; anything else (or exhausting retries) throws TransportError.
std::string post_json(const std::string& base_url, const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body, const RetryPolicy& policy);

/// Reads an environment variable; empty when unset.
std::string env_or_empty(const std::string& name);

}  // namespace magv::detail
