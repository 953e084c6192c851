// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "dcca/error.hpp"
#include "dcca/remote_embed.hpp"
#include "stub_server.hpp"

using namespace dcca;
using dcca::testing::StubEmbedServer;

namespace {

RemoteOptions fast() {
  RemoteOptions o;
  o.initial_backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("t" + std::to_string(i));
  return t;
}

Error capture(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  return Error("none", ErrorCategory::Usage, "no error");
}

}  // namespace

TEST_CASE("parse_endpoint") {
  auto ep = parse_endpoint("http://localhost:8080");
  CHECK(ep.origin == "http://localhost:8080");
  CHECK(ep.base_path.empty());
  ep = parse_endpoint("http://localhost:8080/prefix/");
  CHECK(ep.origin == "http://localhost:8080");
  CHECK(ep.base_path == "/prefix");
  CHECK(capture([] { parse_endpoint("localhost:8080"); }).kind() == "InvalidEndpoint");
}

TEST_CASE("single text gives a 1 x dim matrix") {
  StubEmbedServer server({{"tiny", 8}});
  const auto e = remote_embed(server.url(), "tiny", {"a photo of a hen"}, Space::Euclidean, fast());
  CHECK(e.matrix.rows() == 1);
  CHECK(e.matrix.cols() == 8);
  CHECK(e.manifest.model_id == "tiny");
  CHECK(e.manifest.count == 1);
  CHECK(e.manifest.dim == 8);
  const auto reqs = server.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].model == "tiny");
  CHECK(reqs[0].space == "euclidean");
  CHECK(reqs[0].texts == std::vector<std::string>{"a photo of a hen"});
}

TEST_CASE("300 texts go out as 256 + 44 and come back in order") {
  StubEmbedServer server({{"tiny", 8}});
  const auto texts = numbered(300);
  const auto e = remote_embed(server.url(), "tiny", texts, Space::Hyperbolic, fast());
  const auto reqs = server.requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].texts.size() == 256);
  CHECK(reqs[1].texts.size() == 44);
  CHECK(reqs[1].texts.front() == "t256");
  CHECK(reqs[0].space == "hyperbolic");
  CHECK(e.manifest.space == Space::Hyperbolic);
  REQUIRE(e.matrix.rows() == 300);
  for (Index i = 0; i < 300; ++i) CHECK(e.matrix(i, 0) == static_cast<double>(i));
}

TEST_CASE("batch arithmetic for assorted sizes") {
  StubEmbedServer server({{"tiny", 3}});
  std::size_t seen = 0;
  for (std::size_t n : {1u, 255u, 256u, 257u, 512u, 513u}) {
    const auto e = remote_embed(server.url(), "tiny", numbered(n), Space::Euclidean, fast());
    const auto reqs = server.requests();
    const std::size_t expected = (n + 255) / 256;
    CHECK(reqs.size() - seen == expected);
    for (std::size_t b = seen; b < reqs.size(); ++b) CHECK(reqs[b].texts.size() <= 256);
    seen = reqs.size();
    CHECK(e.matrix.rows() == static_cast<Index>(n));
    CHECK(e.matrix(static_cast<Index>(n) - 1, 0) == static_cast<double>(n - 1));
  }
}

TEST_CASE("base path prefix is honored") {
  StubEmbedServer server({{"tiny", 2}});
  const auto e = remote_embed(server.url() + "/prefix", "tiny", {"x"}, Space::Euclidean, fast());
  CHECK(e.matrix.cols() == 2);
}

TEST_CASE("protocol errors map to error kinds") {
  StubEmbedServer server({{"tiny", 8}, {"dim-flip", 4}});
  auto e = capture([&] { remote_embed(server.url(), "nope", {"x"}, Space::Euclidean, fast()); });
  CHECK(e.kind() == "ModelUnknown");
  CHECK(e.http_status() == 404);
  CHECK(e.category() == ErrorCategory::Data);

  CHECK(capture([&] {
          RemoteOptions o = fast();
          o.batch_size = 300;
          remote_embed(server.url(), "tiny", numbered(300), Space::Euclidean, o);
        }).kind() == "InvalidArgument");

  e = capture([&] { remote_embed(server.url(), "dim-flip", numbered(300), Space::Euclidean, fast()); });
  CHECK(e.kind() == "DimMismatchAcrossBatches");
  CHECK(capture([&] { remote_embed(server.url(), "tiny", {}, Space::Euclidean, fast()); }).kind() ==
        "EmptyInput");
  CHECK(capture([&] { remote_embed(server.url(), "garbage", {"x"}, Space::Euclidean, fast()); }).kind() ==
        "HttpError");
}

TEST_CASE("413 surfaces as PayloadTooLarge") {
  httplib::Server server;
  server.Post("/v1/embed", [](const httplib::Request&, httplib::Response& res) { res.status = 413; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const auto e = capture([&] {
    remote_embed("http://127.0.0.1:" + std::to_string(port), "m", {"x"}, Space::Euclidean, fast());
  });
  server.stop();
  t.join();
  CHECK(e.kind() == "PayloadTooLarge");
  CHECK(e.http_status() == 413);
}

TEST_CASE("transient failures are retried") {
  StubEmbedServer server({{"tiny", 8}});
  server.fail_next(2, 503);
  const auto e = remote_embed(server.url(), "tiny", numbered(3), Space::Euclidean, fast());
  CHECK(e.matrix.rows() == 3);
  CHECK(server.attempts() == 3);

  server.fail_next(3, 500);
  const auto err = capture([&] { remote_embed(server.url(), "tiny", numbered(3), Space::Euclidean, fast()); });
  CHECK(err.kind() == "HttpError");
  CHECK(server.attempts() == 6);

  server.fail_next(1, 429);
  CHECK(remote_embed(server.url(), "tiny", numbered(1), Space::Euclidean, fast()).matrix.rows() == 1);
}

TEST_CASE("client errors are not retried") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const auto e = capture([&] {
    remote_embed("http://127.0.0.1:" + std::to_string(port), "m", {"x"}, Space::Euclidean, fast());
  });
  server.stop();
  t.join();
  CHECK(e.kind() == "HttpError");
  CHECK(e.http_status() == 400);
  CHECK(hits.load() == 1);
}

TEST_CASE("unreachable endpoint fails after retries") {
  RemoteOptions o = fast();
  o.timeout = std::chrono::seconds(1);
  // bind then release a port so nothing listens there
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  const auto e = capture([&] {
    remote_embed("http://127.0.0.1:" + std::to_string(port), "m", {"x"}, Space::Euclidean, o);
  });
  CHECK(e.kind() == "HttpError");
}
