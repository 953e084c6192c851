// SPDX-License-Identifier: Apache-2.0

#include "dcca/remote_embed.hpp"

#include <thread>

#include "dcca/error.hpp"
#include "httplib.h"

namespace dcca {

namespace {

bool is_transient(int status) { return status == 429 || (status >= 500 && status < 600); }

Matrix decode_batch(const std::string& body, std::size_t expected_rows, std::int64_t& dim) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw_data("HttpError", std::string("malformed embedding response: ") + e.what());
  }
  if (!j.contains("dim") || !j.contains("vectors") || !j["vectors"].is_array()) {
    throw_data("HttpError", "embedding response lacks dim/vectors");
  }
  const auto batch_dim = j["dim"].get<std::int64_t>();
  if (batch_dim <= 0) throw_data("HttpError", "embedding response has non-positive dim");
  if (dim < 0) {
    dim = batch_dim;
  } else if (dim != batch_dim) {
    throw_data("DimMismatchAcrossBatches", "batch reported dim " + std::to_string(batch_dim) +
                                               ", earlier batches reported " + std::to_string(dim));
  }
  const auto& vectors = j["vectors"];
  if (vectors.size() != expected_rows) {
    throw_data("HttpError", "embedding response has " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(expected_rows) + " texts");
  }
  Matrix out(static_cast<Index>(expected_rows), static_cast<Index>(batch_dim));
  for (std::size_t r = 0; r < expected_rows; ++r) {
    const auto& row = vectors[r];
    if (!row.is_array() || static_cast<std::int64_t>(row.size()) != batch_dim) {
      throw_data("HttpError", "vector " + std::to_string(r) + " does not have length dim");
    }
    for (std::int64_t c = 0; c < batch_dim; ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return out;
}

}  // namespace

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw_usage("InvalidEndpoint", "endpoint '" + url + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.base_path = url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  }
  return ep;
}

EmbeddingMatrix remote_embed(const std::string& endpoint, const std::string& model_id,
                             const std::vector<std::string>& texts, Space space,
                             const RemoteOptions& options) {
  if (texts.empty()) throw_data("EmptyInput", "remote_embed: no texts to embed");
  if (options.batch_size == 0 || options.batch_size > kMaxTextsPerRequest) {
    throw_usage("InvalidArgument", "remote_embed: batch size must be in [1, 256]");
  }
  const Endpoint ep = parse_endpoint(endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  const std::string route = ep.base_path + "/v1/embed";

  std::vector<Matrix> batches;
  std::int64_t dim = -1;
  for (std::size_t start = 0; start < texts.size(); start += options.batch_size) {
    const std::size_t stop = std::min(texts.size(), start + options.batch_size);
    const nlohmann::json request = {
        {"model", model_id},
        {"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                           texts.begin() + static_cast<std::ptrdiff_t>(stop))},
        {"space", space_name(space)}};
    const std::string payload = request.dump();

    std::string failure;
    bool done = false;
    auto backoff = options.initial_backoff;
    for (int attempt = 1; attempt <= options.max_attempts && !done; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      auto res = client.Post(route, payload, "application/json");
      if (!res) {
        failure = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      const int status = res->status;
      if (status == 200) {
        batches.push_back(decode_batch(res->body, stop - start, dim));
        done = true;
      } else if (status == 404) {
        throw Error("ModelUnknown", ErrorCategory::Data, "model '" + model_id + "' is unknown", 404);
      } else if (status == 413) {
        throw Error("PayloadTooLarge", ErrorCategory::Data,
                    "service rejected a batch of " + std::to_string(stop - start) + " texts", 413);
      } else if (is_transient(status)) {
        failure = "HTTP " + std::to_string(status);
      } else {
        throw Error("HttpError", ErrorCategory::Data,
                    "HTTP " + std::to_string(status) + ": " + res->body, status);
      }
    }
    if (!done) {
      throw Error("HttpError", ErrorCategory::Data,
                  "gave up after " + std::to_string(options.max_attempts) + " attempts: " + failure);
    }
  }

  Matrix all(static_cast<Index>(texts.size()), static_cast<Index>(dim));
  Index row = 0;
  for (const Matrix& b : batches) {
    all.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  EmbeddingMatrix e;
  e.matrix = std::move(all);
  e.manifest.model_id = model_id;
  e.manifest.space = space;
  e.manifest.count = static_cast<std::uint64_t>(e.matrix.rows());
  e.manifest.dim = static_cast<std::uint64_t>(e.matrix.cols());
  require_valid(e.matrix, "remote_embed");
  return e;
}

}  // namespace dcca
