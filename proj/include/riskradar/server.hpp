#pragma once
// Read-only HTTP API over a completed run.
//
//   GET /risks                  risk list
//   GET /risks/{id}             record + decomposition
//   GET /risks/{id}/matches     ranked matches
//   GET /graph?format=json|dot  graph export
//   GET /healthz                status + config digest
//
// Handlers read an immutable snapshot; an optional poller builds a fresh
// snapshot from re-fetched sources and swaps it in without touching the store.

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "riskradar/pipeline.hpp"
#include "riskradar/store.hpp"

namespace riskradar {

struct ServeSnapshot {
  std::vector<RiskRecord> risks;
  std::map<std::string, RiskDecomposition> decompositions;
  std::map<std::string, std::vector<MatchRow>> matches;
  std::vector<NewsItem> news;
  std::string graph_json;
  std::string graph_dot;
  std::string config_digest;
};

inline std::shared_ptr<const ServeSnapshot> load_snapshot(const RecordStore& store) {
  if (store.interrupted_stage())
    throw Error(ErrorCode::Store, "store has an interrupted run; rerun the pipeline before serving");
  if (!store.has_file(store_files::kSummary) || !store.has_file(store_files::kGraphJson))
    throw Error(ErrorCode::Store, "store has no completed run: " + store.root().string());
  auto snap = std::make_shared<ServeSnapshot>();
  snap->risks = store.risks();
  for (auto& d : store.decompositions()) snap->decompositions.emplace(d.risk_id, std::move(d));
  for (auto& row : store.match_rows()) snap->matches[row.risk_id].push_back(std::move(row));
  snap->news = store.news();
  snap->graph_json = store.read_artifact(store_files::kGraphJson).value_or("");
  snap->graph_dot = store.read_artifact(store_files::kGraphDot).value_or("");
  snap->config_digest = store.meta("config_digest").value_or("");
  return snap;
}

// Re-fetches configured sources and re-matches in memory.
inline std::shared_ptr<const ServeSnapshot> refresh_snapshot(const ServeSnapshot& base, const PipelineConfig& config,
                                                             EmbeddingProvider& provider) {
  auto next = std::make_shared<ServeSnapshot>(base);
  std::set<std::string> ids;
  for (const auto& n : next->news) ids.insert(n.id);
  for (const auto& source : configured_sources(config)) {
    auto res = fetch_news(source, config.gkg_schema);
    for (auto& item : res.items)
      if (ids.insert(item.id).second) next->news.push_back(std::move(item));
  }
  std::vector<RiskEntry> risks;
  for (const auto& r : next->risks) {
    RiskEntry e{r, std::nullopt};
    if (auto it = next->decompositions.find(r.id); it != next->decompositions.end()) e.decomposition = it->second;
    risks.push_back(std::move(e));
  }
  auto report = match_all(risks, next->news, provider, config.match);
  next->matches.clear();
  for (auto& row : report_rows(report, next->news)) next->matches[row.risk_id].push_back(std::move(row));
  return next;
}

class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<const ServeSnapshot> snapshot) : snapshot_(std::move(snapshot)) { routes(); }

  void set_snapshot(std::shared_ptr<const ServeSnapshot> s) {
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(s);
  }

  std::shared_ptr<const ServeSnapshot> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  httplib::Server& http() { return server_; }

  // Binds; returns the bound port (useful with port 0).
  int bind(const std::string& host, int port) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Network, fmt::format("cannot bind {}:{}", host, port));
    return bound;
  }

  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  void start_polling(const PipelineConfig& config, std::unique_ptr<EmbeddingProvider> provider,
                     std::chrono::seconds interval) {
    poller_ = std::jthread([this, config, provider = std::move(provider), interval](std::stop_token st) {
      std::mutex m;
      std::condition_variable_any cv;
      while (!st.stop_requested()) {
        std::unique_lock lock(m);
        cv.wait_for(lock, st, interval, [] { return false; });
        if (st.stop_requested()) break;
        try {
          set_snapshot(refresh_snapshot(*snapshot(), config, *provider));
          spdlog::info("poll: snapshot refreshed");
        } catch (const std::exception& e) {
          spdlog::warn("poll failed, keeping previous snapshot: {}", e.what());
        }
      }
    });
  }

 private:
  static void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  }

  static void not_found(httplib::Response& res, const std::string& what) {
    send_json(res, {{"error", "not found"}, {"detail", what}}, 404);
  }

  void routes() {
    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}, {"config_digest", snapshot()->config_digest}});
    });

    server_.Get("/risks", [this](const httplib::Request&, httplib::Response& res) {
      auto snap = snapshot();
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : snap->risks) {
        nlohmann::json j = r;
        auto it = snap->decompositions.find(r.id);
        j["confidence"] = it == snap->decompositions.end() ? nlohmann::json() : nlohmann::json(to_string(it->second.confidence));
        arr.push_back(std::move(j));
      }
      send_json(res, arr);
    });

    server_.Get(R"(/risks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto snap = snapshot();
      const std::string id = req.matches[1];
      auto it = std::find_if(snap->risks.begin(), snap->risks.end(), [&](const RiskRecord& r) { return r.id == id; });
      if (it == snap->risks.end()) return not_found(res, "risk " + id);
      auto d = snap->decompositions.find(id);
      send_json(res, {{"record", *it},
                      {"decomposition", d == snap->decompositions.end() ? nlohmann::json() : nlohmann::json(d->second)}});
    });

    server_.Get(R"(/risks/([^/]+)/matches)", [this](const httplib::Request& req, httplib::Response& res) {
      auto snap = snapshot();
      const std::string id = req.matches[1];
      if (std::none_of(snap->risks.begin(), snap->risks.end(), [&](const RiskRecord& r) { return r.id == id; }))
        return not_found(res, "risk " + id);
      nlohmann::json arr = nlohmann::json::array();
      if (auto it = snap->matches.find(id); it != snap->matches.end())
        for (const auto& row : it->second) arr.push_back(nlohmann::json::parse(row_to_jsonl(row)));
      send_json(res, arr);
    });

    server_.Get("/graph", [this](const httplib::Request& req, httplib::Response& res) {
      auto snap = snapshot();
      std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
      if (format == "json") {
        res.set_content(snap->graph_json, "application/json");
      } else if (format == "dot") {
        res.set_content(snap->graph_dot, "text/vnd.graphviz");
      } else {
        send_json(res, {{"error", "format must be json or dot"}}, 400);
      }
    });
  }

  httplib::Server server_;
  mutable std::mutex mutex_;
  std::shared_ptr<const ServeSnapshot> snapshot_;
  std::jthread poller_;
};

}  // namespace riskradar
