#pragma once

#include <chrono>
#include <map>
#include <string>

namespace lcsynth {

struct HttpResponse {
  int status = 0;  // 0 when the request never got a response
  std::string body;
  std::string error;
};

/// POSTs a JSON body to an absolute http(s) URL.
HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers,
                            std::chrono::milliseconds timeout);

/// Transport errors, 408, 429 and 5xx are worth retrying.
bool is_retryable_status(int status);

/// Reads a secret from the environment; empty when unset.
std::string env_secret(const std::string& variable);

}  // namespace lcsynth
