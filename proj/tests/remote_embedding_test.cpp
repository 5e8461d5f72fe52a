#include <atomic>
#include <mutex>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mock_server.hpp"
#include "riskradar/remote_embedding.hpp"

namespace riskradar {
namespace {

using namespace std::chrono_literals;

// Deterministic fake service: vector i of a batch is (len(text), 1, 0, ..., 0)
// unless a handler override is installed.
struct FakeService {
  testing::MockServer server;
  std::mutex mutex;
  std::vector<std::vector<std::string>> batches;
  std::vector<std::string> auth_headers;
  std::function<void(const nlohmann::json&, httplib::Response&)> respond;
  std::size_t dim = 4;

  FakeService() {
    server.http().Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mutex);
        batches.push_back(body["texts"].get<std::vector<std::string>>());
        auth_headers.push_back(req.get_header_value("Authorization"));
      }
      if (respond) return respond(body, res);
      nlohmann::json vectors = nlohmann::json::array();
      for (const auto& t : body["texts"]) {
        std::vector<double> v(dim, 0.0);
        v[0] = static_cast<double>(t.get<std::string>().size());
        v[1] = 1.0;
        vectors.push_back(v);
      }
      res.set_content(nlohmann::json{{"dim", dim}, {"vectors", vectors}}.dump(), "application/json");
    });
    server.start();
  }

  RemoteProviderConfig config() const {
    RemoteProviderConfig c;
    c.endpoint = server.url("/embed");
    c.model = "fake-model";
    c.dim = dim;
    c.backoff = 1ms;
    c.timeout = 5s;
    return c;
  }
};

EmbeddingVector expected_for(const std::string& t, std::size_t dim) {
  std::vector<float> v(dim, 0.0f);
  v[0] = static_cast<float>(t.size());
  v[1] = 1.0f;
  return normalized(v);
}

template <typename F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

TEST(RemoteEncoder, ReturnsOneVectorPerTextInOrder) {
  FakeService svc;
  RemoteEncoder enc(svc.config());
  std::vector<std::string> texts{"a", "bbb", "cc"};
  auto out = enc.embed_batch(texts);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(out[i], expected_for(texts[i], 4));
    EXPECT_NEAR(l2_norm(out[i]), 1.0, 1e-6);
  }
  EXPECT_EQ(enc.requests_sent(), 1u);
  ASSERT_EQ(svc.batches.size(), 1u);
  EXPECT_EQ(svc.batches[0], texts);
}

TEST(RemoteEncoder, SendsModelAndBearerToken) {
  FakeService svc;
  std::string model;
  svc.respond = [&](const nlohmann::json& body, httplib::Response& res) {
    model = body["model"].get<std::string>();
    res.set_content(R"({"dim":4,"vectors":[[1,0,0,0]]})", "application/json");
  };
  auto cfg = svc.config();
  cfg.bearer_token = "s3cret";
  RemoteEncoder enc(cfg);
  enc.embed_batch(std::vector<std::string>{"x"});
  EXPECT_EQ(model, "fake-model");
  EXPECT_EQ(svc.auth_headers.at(0), "Bearer s3cret");

  RemoteEncoder anonymous(svc.config());
  anonymous.embed_batch(std::vector<std::string>{"x"});
  EXPECT_EQ(svc.auth_headers.at(1), "");
}

TEST(RemoteEncoder, BatchesPreserveOrder) {
  FakeService svc;
  auto cfg = svc.config();
  cfg.max_batch = 3;
  cfg.concurrency = 3;
  RemoteEncoder enc(cfg);
  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) texts.push_back(std::string(static_cast<std::size_t>(i + 1), 'q'));
  auto out = enc.embed_batch(texts);
  ASSERT_EQ(out.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(out[i], expected_for(texts[i], 4)) << i;
  EXPECT_EQ(enc.requests_sent(), 4u);
  std::vector<std::size_t> sizes;
  for (const auto& b : svc.batches) sizes.push_back(b.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 3, 3, 3}));
}

TEST(RemoteEncoder, EmptyInputSendsNothing) {
  FakeService svc;
  RemoteEncoder enc(svc.config());
  EXPECT_TRUE(enc.embed_batch(std::vector<std::string>{}).empty());
  EXPECT_EQ(enc.requests_sent(), 0u);
}

TEST(RemoteEncoder, RenormalizesVectors) {
  FakeService svc;
  svc.respond = [](const nlohmann::json&, httplib::Response& res) {
    res.set_content(R"({"dim":4,"vectors":[[2,0,0,0],[0,0,0,0]]})", "application/json");
  };
  RemoteEncoder enc(svc.config());
  auto out = enc.embed_batch(std::vector<std::string>{"a", "b"});
  EXPECT_EQ(out[0].values, (std::vector<float>{1, 0, 0, 0}));
  EXPECT_TRUE(out[1].zero);
}

TEST(RemoteEncoder, MalformedResponses) {
  const std::vector<std::pair<std::string, ErrorCode>> cases{
      {R"({"dim":4,"vectors":[[1,0,0,0],[1,0,0,0]]})", ErrorCode::MalformedResponse},  // 2 vectors for 3 texts
      {R"({"dim":8,"vectors":[[1,0,0,0,0,0,0,0],[1,0,0,0,0,0,0,0],[1,0,0,0,0,0,0,0]]})",
       ErrorCode::DimensionMismatch},
      {R"({"dim":4,"vectors":[[1,0,0],[1,0,0,0],[1,0,0,0]]})", ErrorCode::MalformedResponse},
      {R"({"dim":4,"vectors":[[1,0,0,"x"],[1,0,0,0],[1,0,0,0]]})", ErrorCode::MalformedResponse},
      {R"({"vectors":[]})", ErrorCode::MalformedResponse},
      {R"(not json)", ErrorCode::MalformedResponse},
      {R"([1,2,3])", ErrorCode::MalformedResponse},
  };
  for (const auto& [body, code] : cases) {
    FakeService svc;
    svc.respond = [&body](const nlohmann::json&, httplib::Response& res) { res.set_content(body, "application/json"); };
    RemoteEncoder enc(svc.config());
    EXPECT_EQ(error_code_of([&] { enc.embed_batch(std::vector<std::string>{"a", "b", "c"}); }), code) << body;
  }
}

TEST(RemoteEncoder, RetriesTransientFailuresOnly) {
  FakeService svc;
  std::atomic<int> calls{0};
  svc.respond = [&](const nlohmann::json&, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 502;
      return;
    }
    res.set_content(R"({"dim":4,"vectors":[[0,1,0,0]]})", "application/json");
  };
  RemoteEncoder enc(svc.config());
  EXPECT_EQ(enc.embed_batch(std::vector<std::string>{"a"})[0].values, (std::vector<float>{0, 1, 0, 0}));
  EXPECT_EQ(enc.requests_sent(), 2u);

  FakeService denied;
  denied.respond = [](const nlohmann::json&, httplib::Response& res) { res.status = 401; };
  RemoteEncoder rejected(denied.config());
  EXPECT_EQ(error_code_of([&] { rejected.embed_batch(std::vector<std::string>{"a"}); }), ErrorCode::Network);
  EXPECT_EQ(rejected.requests_sent(), 1u);
}

TEST(RemoteEncoder, FingerprintNamesModelAndDim) {
  RemoteProviderConfig cfg;
  cfg.endpoint = "http://127.0.0.1:9/embed";
  cfg.model = "m1";
  auto a = RemoteEncoder(cfg).fingerprint();
  cfg.model = "m2";
  EXPECT_NE(a, RemoteEncoder(cfg).fingerprint());
  cfg.dim = 0;
  EXPECT_THROW(RemoteEncoder{cfg}, Error);
}

}  // namespace
}  // namespace riskradar
