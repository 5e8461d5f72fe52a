#pragma once
// Scores news against risks by embedding cosine and emits ranked reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskradar/embedding.hpp"
#include "riskradar/error.hpp"
#include "riskradar/extraction.hpp"
#include "riskradar/newsfeed.hpp"

namespace riskradar {

enum class QueryMode { FullText, TriggerOnly, TriggerPlusOutcome };

constexpr std::string_view to_string(QueryMode m) {
  switch (m) {
    case QueryMode::FullText: return "full_text";
    case QueryMode::TriggerOnly: return "trigger_only";
    case QueryMode::TriggerPlusOutcome: return "trigger_plus_outcome";
  }
  return "";
}

inline QueryMode query_mode_from_string(std::string_view s) {
  if (s == "full_text") return QueryMode::FullText;
  if (s == "trigger_only") return QueryMode::TriggerOnly;
  if (s == "trigger_plus_outcome") return QueryMode::TriggerPlusOutcome;
  throw Error(ErrorCode::Usage, "unknown query mode '" + std::string(s) + "'");
}

// Ties are broken by score desc, then published_at desc (undated last), then
// news_id asc.
struct MatchConfig {
  QueryMode mode = QueryMode::FullText;
  double threshold = 0.35;
  std::size_t top_k = 10;
  bool keyword_prefilter = true;
  StopwordSet stopwords = default_stopwords();

  // Configured values must lie in [-1, 1]. The scorer itself accepts any
  // finite threshold; one above 1 simply admits nothing.
  void validate() const {
    if (!(threshold >= -1.0 && threshold <= 1.0))
      throw Error(ErrorCode::Config, fmt::format("threshold {} outside [-1, 1]", threshold));
    check_scorable();
  }

  void check_scorable() const {
    if (!std::isfinite(threshold)) throw Error(ErrorCode::Config, "threshold must be finite");
    if (top_k < 1) throw Error(ErrorCode::Config, "top_k must be at least 1");
  }
};

struct MatchResult {
  std::string risk_id;
  std::string news_id;
  double score = 0.0;
  std::size_t rank = 0;

  bool operator==(const MatchResult&) const = default;
};

struct RiskEntry {
  RiskRecord record;
  std::optional<RiskDecomposition> decomposition;
};

inline std::string build_query(const RiskEntry& risk, QueryMode mode) {
  if (mode == QueryMode::FullText) return risk.record.raw_text;
  if (!risk.decomposition)
    throw Error(ErrorCode::InvalidInput,
                "query mode " + std::string(to_string(mode)) + " needs a decomposition for risk '" + risk.record.id + "'");
  std::string q = risk.decomposition->trigger.str();
  if (mode == QueryMode::TriggerPlusOutcome)
    for (const auto& o : risk.decomposition->outcomes) q += " " + o.str();
  return q;
}

// Write-once-per-key store of news embeddings, safe for concurrent readers.
class EmbeddingCache {
 public:
  std::optional<EmbeddingVector> find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = vectors_.find(id);
    if (it == vectors_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return vectors_.count(id) != 0;
  }

  // Returns false (and keeps the existing vector) when id is already present.
  bool insert(const std::string& id, EmbeddingVector v) {
    std::unique_lock lock(mutex_);
    return vectors_.try_emplace(id, std::move(v)).second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return vectors_.size();
  }

  std::map<std::string, EmbeddingVector> snapshot() const {
    std::shared_lock lock(mutex_);
    return {vectors_.begin(), vectors_.end()};
  }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

namespace detail {

struct Scored {
  const NewsItem* item;
  double score;
};

inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  const auto& pa = a.item->published_at;
  const auto& pb = b.item->published_at;
  if (pa != pb) {
    if (!pa) return false;
    if (!pb) return true;
    return *pa > *pb;
  }
  return a.item->id < b.item->id;
}

inline std::vector<const NewsItem*> candidates_for(const RiskEntry& risk, const std::vector<NewsItem>& corpus,
                                                   const MatchConfig& config) {
  std::optional<std::set<std::string, std::less<>>> expanded;
  if (config.keyword_prefilter) {
    if (!risk.decomposition)
      throw Error(ErrorCode::EmptyKeywordSet, "risk '" + risk.record.id + "' has no decomposition for the prefilter");
    expanded = expand_keywords(build_keywords(*risk.decomposition, config.stopwords));
  }
  std::vector<const NewsItem*> out;
  std::unordered_set<std::string> seen;
  for (const auto& item : corpus) {
    if (!seen.insert(item.id).second) continue;
    if (expanded && !keyword_match(item, *expanded)) continue;
    out.push_back(&item);
  }
  return out;
}

inline std::vector<MatchResult> rank_scored(const std::string& risk_id, std::vector<Scored> scored,
                                            const MatchConfig& config) {
  std::erase_if(scored, [&](const Scored& s) { return s.score < config.threshold; });
  std::sort(scored.begin(), scored.end(), ranks_before);
  if (scored.size() > config.top_k) scored.resize(config.top_k);
  std::vector<MatchResult> out;
  out.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i)
    out.push_back({risk_id, scored[i].item->id, scored[i].score, i + 1});
  return out;
}

}  // namespace detail

inline std::vector<MatchResult> match_risk(const RiskEntry& risk, const std::vector<NewsItem>& corpus,
                                           EmbeddingProvider& provider, const MatchConfig& config) {
  config.check_scorable();
  auto candidates = detail::candidates_for(risk, corpus, config);
  if (candidates.empty()) return {};

  std::vector<std::string> texts{build_query(risk, config.mode)};
  for (const NewsItem* item : candidates) texts.push_back(item->headline);
  auto vectors = provider.embed_batch(texts);
  if (vectors.size() != texts.size()) throw Error(ErrorCode::MalformedResponse, "provider returned wrong vector count");

  std::vector<detail::Scored> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scored.push_back({candidates[i], cosine(vectors[0], vectors[i + 1])});
  return detail::rank_scored(risk.record.id, std::move(scored), config);
}

struct RiskMatches {
  std::string risk_id;
  std::vector<MatchResult> results;
  std::size_t candidates = 0;
  std::optional<std::string> error;
};

struct MatchReport {
  std::vector<RiskMatches> risks;  // ordered by risk id

  std::size_t total_matches() const {
    std::size_t n = 0;
    for (const auto& r : risks) n += r.results.size();
    return n;
  }
};

// Embeds every corpus item at most once (through `cache`), then scores each
// risk. Per-risk failures are recorded and do not stop other risks.
inline MatchReport match_all(const std::vector<RiskEntry>& risks, const std::vector<NewsItem>& corpus,
                             EmbeddingProvider& provider, const MatchConfig& config, EmbeddingCache& cache,
                             unsigned workers = 1) {
  config.check_scorable();
  MatchReport report;
  if (risks.empty()) return report;

  std::vector<std::string> missing_ids, missing_texts;
  std::unordered_set<std::string> queued;
  for (const auto& item : corpus) {
    if (cache.contains(item.id) || !queued.insert(item.id).second) continue;
    missing_ids.push_back(item.id);
    missing_texts.push_back(item.headline);
  }
  if (!missing_texts.empty()) {
    auto vectors = provider.embed_batch(missing_texts);
    if (vectors.size() != missing_texts.size())
      throw Error(ErrorCode::MalformedResponse, "provider returned wrong vector count");
    for (std::size_t i = 0; i < vectors.size(); ++i) cache.insert(missing_ids[i], std::move(vectors[i]));
  }

  std::vector<const RiskEntry*> ordered;
  for (const auto& r : risks) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RiskEntry* a, const RiskEntry* b) { return a->record.id < b->record.id; });
  report.risks.resize(ordered.size());

  auto score_one = [&](std::size_t idx) {
    const RiskEntry& risk = *ordered[idx];
    RiskMatches& out = report.risks[idx];
    out.risk_id = risk.record.id;
    try {
      auto candidates = detail::candidates_for(risk, corpus, config);
      out.candidates = candidates.size();
      if (candidates.empty()) return;
      std::vector<std::string> query{build_query(risk, config.mode)};
      auto qv = provider.embed_batch(query);
      if (qv.size() != 1) throw Error(ErrorCode::MalformedResponse, "provider returned wrong vector count");
      std::vector<detail::Scored> scored;
      scored.reserve(candidates.size());
      for (const NewsItem* item : candidates) scored.push_back({item, cosine(qv[0], *cache.find(item->id))});
      out.results = detail::rank_scored(risk.record.id, std::move(scored), config);
    } catch (const std::exception& e) {
      out.results.clear();
      out.error = e.what();
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(ordered.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < ordered.size(); ++i) score_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < ordered.size(); i = next++) score_one(i);
      });
  }
  return report;
}

inline MatchReport match_all(const std::vector<RiskEntry>& risks, const std::vector<NewsItem>& corpus,
                             EmbeddingProvider& provider, const MatchConfig& config) {
  EmbeddingCache cache;
  return match_all(risks, corpus, provider, config, cache);
}

// ---------------------------------------------------------------------------
// Report output

// One flattened report row, as persisted and served.
struct MatchRow {
  std::string risk_id;
  std::size_t rank = 0;
  double score = 0.0;
  std::string news_id;
  std::string headline;
  std::string url;
  std::string source;
  std::optional<std::string> published_at;
  std::optional<std::string> error;  // set for per-risk failure rows
};

inline std::vector<MatchRow> report_rows(const MatchReport& report, const std::vector<NewsItem>& corpus) {
  std::unordered_map<std::string, const NewsItem*> by_id;
  for (const auto& n : corpus) by_id.try_emplace(n.id, &n);
  std::vector<MatchRow> rows;
  for (const auto& risk : report.risks) {
    if (risk.error) {
      rows.push_back(MatchRow{risk.risk_id, 0, 0.0, {}, {}, {}, {}, std::nullopt, risk.error});
      continue;
    }
    for (const auto& r : risk.results) {
      const NewsItem& item = *by_id.at(r.news_id);
      rows.push_back(MatchRow{r.risk_id, r.rank, r.score, r.news_id, item.headline, item.url, item.source,
                              item.published_at ? std::optional(timeutil::format_utc(*item.published_at))
                                                : std::nullopt,
                              std::nullopt});
    }
  }
  return rows;
}

inline std::string format_score(double score) {
  std::string s = fmt::format("{:.4f}", score);
  return s == "-0.0000" ? "0.0000" : s;
}

inline std::string row_to_jsonl(const MatchRow& row) {
  using nlohmann::json;
  if (row.error) return fmt::format("{{\"risk_id\":{},\"error\":{}}}", json(row.risk_id).dump(), json(*row.error).dump());
  return fmt::format(
      "{{\"risk_id\":{},\"rank\":{},\"score\":{},\"news_id\":{},\"headline\":{},\"url\":{},\"source\":{},"
      "\"published_at\":{}}}",
      json(row.risk_id).dump(), row.rank, format_score(row.score), json(row.news_id).dump(), json(row.headline).dump(),
      json(row.url).dump(), json(row.source).dump(), row.published_at ? json(*row.published_at).dump() : "null");
}

inline std::string render_jsonl(const std::vector<MatchRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += row_to_jsonl(r) + "\n";
  return out;
}

inline MatchRow row_from_json(const nlohmann::json& j) {
  MatchRow row;
  row.risk_id = j.at("risk_id").get<std::string>();
  if (j.contains("error")) {
    row.error = j.at("error").get<std::string>();
    return row;
  }
  row.rank = j.at("rank").get<std::size_t>();
  row.score = j.at("score").get<double>();
  row.news_id = j.at("news_id").get<std::string>();
  row.headline = j.at("headline").get<std::string>();
  row.url = j.value("url", std::string());
  row.source = j.value("source", std::string());
  if (j.contains("published_at") && j.at("published_at").is_string())
    row.published_at = j.at("published_at").get<std::string>();
  return row;
}

inline std::string render_markdown(const std::vector<MatchRow>& rows) {
  auto cell = [](std::string s) {
    std::string out;
    for (char c : s) {
      if (c == '|') out += "\\|";
      else if (c == '\n') out += ' ';
      else out += c;
    }
    return out;
  };
  std::string out = "| risk_id | rank | score | headline | url | source | published_at |\n"
                    "|---|---:|---:|---|---|---|---|\n";
  for (const auto& r : rows) {
    if (r.error) {
      out += fmt::format("| {} | - | - | error: {} | | | |\n", cell(r.risk_id), cell(*r.error));
      continue;
    }
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", cell(r.risk_id), r.rank, format_score(r.score),
                       cell(r.headline), cell(r.url), cell(r.source), r.published_at.value_or(""));
  }
  return out;
}

}  // namespace riskradar
