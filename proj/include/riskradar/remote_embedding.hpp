#pragma once
// HTTP client for an external sentence-embedding service.
//
// Wire protocol: POST <endpoint> with {"model": m, "texts": [...]} and an
// optional "Authorization: Bearer <token>" header; the service answers
// {"dim": d, "vectors": [[...], ...]}. Vectors are renormalized locally.

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "riskradar/embedding.hpp"
#include "riskradar/error.hpp"
#include "riskradar/fetch.hpp"

namespace riskradar {

struct RemoteProviderConfig {
  std::string endpoint;  // full URL, e.g. http://host:8000/embed
  std::string model;
  std::string bearer_token;
  std::size_t dim = 384;  // declared provider dimension
  std::size_t max_batch = 64;
  int concurrency = 4;
  int retries = 2;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{30};
  double max_requests_per_second = 0.0;  // 0 disables rate limiting
};

class RemoteEncoder final : public EmbeddingProvider {
 public:
  explicit RemoteEncoder(RemoteProviderConfig config) : config_(std::move(config)), url_(detail::parse_http_url(config_.endpoint)) {
    if (config_.dim == 0) throw Error(ErrorCode::Config, "remote provider dim must be positive");
    if (config_.max_batch == 0) throw Error(ErrorCode::Config, "remote provider max_batch must be positive");
    if (config_.concurrency < 1) config_.concurrency = 1;
  }

  std::size_t dim() const override { return config_.dim; }

  std::string fingerprint() const override {
    return fmt::format("remote:{};model={};dim={}", config_.endpoint, config_.model, config_.dim);
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    const std::size_t batches = (texts.size() + config_.max_batch - 1) / config_.max_batch;
    std::vector<std::vector<EmbeddingVector>> results(batches);
    std::vector<std::exception_ptr> errors(batches);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
      for (std::size_t b = next++; b < batches; b = next++) {
        auto chunk = texts.subspan(b * config_.max_batch,
                                   std::min(config_.max_batch, texts.size() - b * config_.max_batch));
        try {
          results[b] = request(chunk);
        } catch (...) {
          errors[b] = std::current_exception();
        }
      }
    };
    std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config_.concurrency), batches);
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results)
      for (auto& v : r) out.push_back(std::move(v));
    return out;
  }

  std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

 private:
  void throttle() {
    if (config_.max_requests_per_second <= 0.0) return;
    auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / config_.max_requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(rate_mutex_);
      auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_slot_);
      next_slot_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
  }

  std::vector<EmbeddingVector> parse_response(const std::string& body, std::size_t expected) const {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::MalformedResponse, "response is not a JSON object");
    if (!doc.contains("dim") || !doc["dim"].is_number_unsigned())
      throw Error(ErrorCode::MalformedResponse, "response lacks an unsigned 'dim'");
    if (!doc.contains("vectors") || !doc["vectors"].is_array())
      throw Error(ErrorCode::MalformedResponse, "response lacks a 'vectors' array");
    auto dim = doc["dim"].get<std::size_t>();
    if (dim != config_.dim)
      throw Error(ErrorCode::DimensionMismatch, fmt::format("provider returned dim {}, declared {}", dim, config_.dim));
    const auto& vectors = doc["vectors"];
    if (vectors.size() != expected)
      throw Error(ErrorCode::MalformedResponse,
                  fmt::format("provider returned {} vectors for {} texts", vectors.size(), expected));

    std::vector<EmbeddingVector> out;
    out.reserve(expected);
    for (const auto& v : vectors) {
      if (!v.is_array() || v.size() != dim)
        throw Error(ErrorCode::MalformedResponse, fmt::format("vector length differs from dim {}", dim));
      std::vector<float> values;
      values.reserve(dim);
      for (const auto& x : v) {
        if (!x.is_number()) throw Error(ErrorCode::MalformedResponse, "non-numeric vector component");
        values.push_back(x.get<float>());
      }
      out.push_back(normalized(std::move(values)));
    }
    return out;
  }

  std::vector<EmbeddingVector> request(std::span<const std::string> chunk) {
    nlohmann::json body{{"model", config_.model}, {"texts", nlohmann::json::array()}};
    for (const auto& t : chunk) body["texts"].push_back(t);
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + config_.bearer_token);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
      throttle();
      httplib::Client client(url_.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      ++requests_sent_;
      auto res = client.Post(url_.path_and_query, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        spdlog::warn("embedding request failed (attempt {}): {}", attempt + 1, last_error);
        continue;
      }
      if (res->status / 100 == 2) return parse_response(res->body, chunk.size());
      last_error = fmt::format("HTTP {}", res->status);
      if (!detail::transient_status(res->status)) break;
    }
    throw Error(ErrorCode::Network, "embedding provider " + config_.endpoint + ": " + last_error);
  }

  RemoteProviderConfig config_;
  detail::ParsedUrl url_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace riskradar
