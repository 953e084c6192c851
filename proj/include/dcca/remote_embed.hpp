// SPDX-License-Identifier: Apache-2.0
//
// Client for the embedding service:
//   POST {endpoint}/v1/embed  {"model", "texts", "space"}
//   -> 200 {"dim", "vectors"} | 400 malformed | 404 unknown model | 413 too many texts

#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "dcca/embedding_store.hpp"

namespace dcca {

inline constexpr std::size_t kMaxTextsPerRequest = 256;

struct RemoteOptions {
  std::size_t batch_size = kMaxTextsPerRequest;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{60};
};

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // "" or "/prefix"
};

/// Splits "http://host:port/prefix" into origin and path prefix.
Endpoint parse_endpoint(const std::string& url);

/// Embeds `texts` in batches of at most options.batch_size, preserving input
/// order. Transient failures (connection errors, 5xx, 429) are retried with
/// exponential backoff; 400/404/413 fail immediately.
EmbeddingMatrix remote_embed(const std::string& endpoint, const std::string& model_id,
                             const std::vector<std::string>& texts, Space space,
                             const RemoteOptions& options = {});

}  // namespace dcca
