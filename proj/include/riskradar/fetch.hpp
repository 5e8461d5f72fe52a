#pragma once
// Raw payload retrieval for news sources: local files, HTTP(S) feeds and
// GDELT files (optionally zip-wrapped).

#include <charconv>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "riskradar/error.hpp"
#include "riskradar/text.hpp"
#include "riskradar/zip.hpp"

namespace riskradar {

enum class SourceKind { GdeltFile, RssUrl, LocalFixture };
enum class PayloadFormat { Auto, Gkg, Feed };

inline SourceKind source_kind_from_string(std::string_view s) {
  if (s == "gdelt_file") return SourceKind::GdeltFile;
  if (s == "rss_url") return SourceKind::RssUrl;
  if (s == "local_fixture") return SourceKind::LocalFixture;
  throw Error(ErrorCode::Config, "unknown source kind '" + std::string(s) + "'");
}

inline PayloadFormat payload_format_from_string(std::string_view s) {
  if (s == "auto") return PayloadFormat::Auto;
  if (s == "gkg") return PayloadFormat::Gkg;
  if (s == "feed") return PayloadFormat::Feed;
  throw Error(ErrorCode::Config, "unknown payload format '" + std::string(s) + "'");
}

struct SourceDescriptor {
  std::string name;
  SourceKind kind = SourceKind::LocalFixture;
  std::string locator;  // file path or http(s) URL
  PayloadFormat format = PayloadFormat::Auto;
  std::chrono::seconds timeout{30};
  std::size_t max_bytes = 256u << 20;
  int retries = 3;
  std::chrono::milliseconds backoff{250};
};

inline bool is_http_url(std::string_view s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

// Caps concurrent requests per host.
class HostLimiter {
 public:
  static constexpr int kMaxInFlight = 2;

  static HostLimiter& instance() {
    static HostLimiter limiter;
    return limiter;
  }

  class Permit {
   public:
    Permit(HostLimiter& owner, std::string host) : owner_(&owner), host_(std::move(host)) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)), host_(std::move(other.host_)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release(host_);
    }

   private:
    HostLimiter* owner_;
    std::string host_;
  };

  Permit acquire(const std::string& host) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_[host] < kMaxInFlight; });
    int now = ++in_flight_[host];
    peak_[host] = std::max(peak_[host], now);
    return Permit(*this, host);
  }

  int peak(const std::string& host) {
    std::lock_guard lock(mutex_);
    return peak_[host];
  }

 private:
  void release(const std::string& host) {
    {
      std::lock_guard lock(mutex_);
      --in_flight_[host];
    }
    cv_.notify_all();
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, int> in_flight_;
  std::map<std::string, int> peak_;
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string host;
  std::string path_and_query;
};

inline ParsedUrl parse_http_url(std::string_view url) {
  if (!is_http_url(url)) throw Error(ErrorCode::InvalidInput, "not an http(s) URL: " + std::string(url));
  auto scheme_end = url.find("://");
  auto rest = url.substr(scheme_end + 3);
  auto path_start = rest.find_first_of("/?");
  std::string_view authority = rest.substr(0, path_start);
  ParsedUrl out;
  out.origin = std::string(url.substr(0, scheme_end + 3)) + std::string(authority);
  out.host = text::to_lower(authority.substr(0, authority.find(':')));
  out.path_and_query = path_start == std::string_view::npos ? "/" : std::string(rest.substr(path_start));
  if (!out.path_and_query.empty() && out.path_and_query.front() == '?') out.path_and_query.insert(0, "/");
  return out;
}

inline bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace detail

// GET with size cap, per-host concurrency limit, and retries with
// exponential backoff on transient failures.
inline std::string http_get(std::string_view url, std::chrono::seconds timeout, std::size_t max_bytes, int retries,
                            std::chrono::milliseconds backoff) {
  auto parsed = detail::parse_http_url(url);
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff * (1 << (attempt - 1)));

    auto permit = HostLimiter::instance().acquire(parsed.host);
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_follow_location(true);

    std::string body;
    bool over_cap = false;
    auto deadline = std::chrono::steady_clock::now() + timeout;
    bool timed_out = false;
    auto result = client.Get(
        parsed.path_and_query,
        [&](const httplib::Response& response) {
          if (response.has_header("Content-Length")) {
            std::string value = response.get_header_value("Content-Length");
            std::uint64_t length = 0;
            std::from_chars(value.data(), value.data() + value.size(), length);
            if (length > max_bytes && response.status / 100 == 2) {
              over_cap = true;
              return false;
            }
          }
          return true;
        },
        [&](const char* data, std::size_t len) {
          if (body.size() + len > max_bytes) {
            over_cap = true;
            return false;
          }
          if (std::chrono::steady_clock::now() > deadline) {
            timed_out = true;
            return false;
          }
          body.append(data, len);
          return true;
        });

    if (over_cap)
      throw Error(ErrorCode::SizeCapExceeded, fmt::format("{} exceeds {} bytes", url, max_bytes));
    if (!result) {
      last_error = timed_out ? std::string("timed out") : httplib::to_string(result.error());
      spdlog::warn("GET {} failed (attempt {}): {}", url, attempt + 1, last_error);
      continue;
    }
    if (result->status / 100 == 2) return body;
    last_error = fmt::format("HTTP {}", result->status);
    if (!detail::transient_status(result->status)) break;
    spdlog::warn("GET {} returned {} (attempt {})", url, result->status, attempt + 1);
  }
  throw Error(ErrorCode::Network, fmt::format("GET {}: {}", url, last_error));
}

inline std::string read_file(const std::filesystem::path& path, std::size_t max_bytes) {
  std::error_code ec;
  auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot read " + path.string() + ": " + ec.message());
  if (size > max_bytes)
    throw Error(ErrorCode::SizeCapExceeded, fmt::format("{} is {} bytes, cap is {}", path.string(), size, max_bytes));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string data(size, '\0');
  in.read(data.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) throw Error(ErrorCode::Io, "short read on " + path.string());
  return data;
}

inline std::string fetch_source(const SourceDescriptor& source) {
  std::string payload = is_http_url(source.locator)
                            ? http_get(source.locator, source.timeout, source.max_bytes, source.retries, source.backoff)
                            : read_file(source.locator, source.max_bytes);
  if (source.kind == SourceKind::GdeltFile && zip::looks_like_zip(payload))
    return zip::extract_single_member(payload, source.max_bytes);
  return payload;
}

}  // namespace riskradar
