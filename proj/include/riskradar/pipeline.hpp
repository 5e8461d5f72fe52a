#pragma once
// Four-stage pipeline: risks -> decompositions -> knowledge graph, news
// ingestion, and matching. Every stage persists its output to the store
// before the next one starts.

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "riskradar/config.hpp"
#include "riskradar/extraction.hpp"
#include "riskradar/fetch.hpp"
#include "riskradar/matcher.hpp"
#include "riskradar/newsfeed.hpp"
#include "riskradar/riskgraph.hpp"
#include "riskradar/store.hpp"

namespace riskradar {

struct RunSummary {
  std::size_t risks = 0;  // total in store after ingest
  std::size_t risks_added = 0;
  std::size_t risk_duplicates = 0;
  std::size_t decomposed_full = 0;
  std::size_t decomposed_partial = 0;
  std::size_t decomposed_trigger_only = 0;
  std::size_t extraction_failed = 0;
  std::size_t graph_nodes = 0;
  std::size_t graph_edges = 0;
  std::size_t news_input_units = 0;
  std::size_t news_parsed = 0;
  std::size_t parse_errors = 0;
  std::size_t news_added = 0;
  std::size_t news_total = 0;
  std::size_t candidates = 0;
  std::size_t matches = 0;
  std::size_t match_errors = 0;
  std::vector<std::pair<std::string, double>> stage_ms;
  std::string config_digest;
  std::string report_digest;
  std::string graph_digest;
  std::optional<std::string> failed_stage;
  std::optional<std::string> error;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["risks"] = risks;
    j["risks_added"] = risks_added;
    j["risk_duplicates"] = risk_duplicates;
    j["decomposed_full"] = decomposed_full;
    j["decomposed_partial"] = decomposed_partial;
    j["decomposed_trigger_only"] = decomposed_trigger_only;
    j["extraction_failed"] = extraction_failed;
    j["graph_nodes"] = graph_nodes;
    j["graph_edges"] = graph_edges;
    j["news_input_units"] = news_input_units;
    j["news_parsed"] = news_parsed;
    j["parse_errors"] = parse_errors;
    j["news_added"] = news_added;
    j["news_total"] = news_total;
    j["candidates"] = candidates;
    j["matches"] = matches;
    j["match_errors"] = match_errors;
    nlohmann::ordered_json timing = nlohmann::ordered_json::object();
    for (const auto& [stage, ms] : stage_ms) timing[stage] = std::round(ms * 1000.0) / 1000.0;
    j["stage_ms"] = timing;
    j["config_digest"] = config_digest;
    j["report_digest"] = report_digest;
    j["graph_digest"] = graph_digest;
    j["failed_stage"] = failed_stage ? nlohmann::ordered_json(*failed_stage) : nlohmann::ordered_json();
    j["error"] = error ? nlohmann::ordered_json(*error) : nlohmann::ordered_json();
    return j;
  }
};

namespace pipeline_detail {

class StageTimer {
 public:
  StageTimer(RunSummary& summary, std::string stage)
      : summary_(summary), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start_;
    summary_.stage_ms.emplace_back(stage_, ms.count());
  }

 private:
  RunSummary& summary_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace pipeline_detail

// ---------------------------------------------------------------- stages

inline AppendResult ingest_risks(const std::filesystem::path& file, RecordStore& store, RunSummary& summary) {
  std::string content = read_file(file, std::size_t{64} << 20);
  auto records = parse_risk_repository(content, file.filename().string());
  if (records.empty()) throw Error(ErrorCode::InvalidInput, "no valid risk records in " + file.string());
  store.begin_stage("ingest");
  auto result = store.append_risks(records);
  summary.risks_added += result.added;
  summary.risk_duplicates += result.duplicates;
  summary.risks = store.risks().size();
  spdlog::info("ingested {} risks ({} duplicates skipped)", result.added, result.duplicates);
  return result;
}

inline std::vector<RiskDecomposition> run_extract(const Extractor& extractor, RecordStore& store,
                                                  RunSummary& summary) {
  auto risks = store.risks();
  summary.risks = risks.size();
  if (risks.empty()) throw Error(ErrorCode::InvalidInput, "store holds no risks; run ingest-risks first");
  store.begin_stage("extract");
  std::vector<RiskDecomposition> out;
  std::string lines;
  for (const auto& r : risks) {
    try {
      auto d = extractor.decompose(r);
      switch (d.confidence) {
        case Confidence::Full: ++summary.decomposed_full; break;
        case Confidence::Partial: ++summary.decomposed_partial; break;
        case Confidence::TriggerOnly: ++summary.decomposed_trigger_only; break;
      }
      lines += nlohmann::json(d).dump() + "\n";
      out.push_back(std::move(d));
    } catch (const Error& e) {
      ++summary.extraction_failed;
      spdlog::warn("risk {}: {}", r.id, e.what());
    }
  }
  store.write_artifact(store_files::kDecompositions, "decomposition/1", lines);
  return out;
}

inline KnowledgeGraph build_graph(const std::vector<RiskDecomposition>& decompositions) {
  KnowledgeGraph graph;
  for (const auto& d : decompositions)
    if (d.confidence != Confidence::TriggerOnly) graph.add_risk(d);
  return graph;
}

inline KnowledgeGraph run_graph(const std::vector<RiskDecomposition>& decompositions, RecordStore& store,
                                RunSummary& summary) {
  store.begin_stage("graph");
  auto graph = build_graph(decompositions);
  auto json = export_graph(graph, GraphFormat::Json);
  auto dot = export_graph(graph, GraphFormat::Dot);
  store.write_artifact(store_files::kGraphJson, "riskgraph/1", json);
  store.write_artifact(store_files::kGraphDot, "dot/1", dot);
  summary.graph_nodes = graph.nodes().size();
  summary.graph_edges = graph.edges().size();
  summary.graph_digest = text::hex64(text::fnv1a64(json + dot));
  return graph;
}

inline NewsParseResult parse_payload(std::string_view payload, PayloadFormat format, const GkgSchema& schema) {
  if (format == PayloadFormat::Auto) {
    auto t = payload;
    if (t.substr(0, 3) == "\xEF\xBB\xBF") t.remove_prefix(3);
    t = text::trim(t);
    format = !t.empty() && t.front() == '<' ? PayloadFormat::Feed : PayloadFormat::Gkg;
  }
  return format == PayloadFormat::Feed ? parse_feed(payload) : parse_gkg(payload, schema);
}

// Fetches and parses one source; nothing is persisted here.
inline NewsParseResult fetch_news(const SourceDescriptor& source, const GkgSchema& schema) {
  auto payload = fetch_source(source);
  auto res = parse_payload(payload, source.format, schema);
  for (const auto& e : res.errors)
    spdlog::debug("source {}: line {}: {} ({})", source.name, e.line, to_string(e.kind), e.reason);
  if (!res.errors.empty())
    spdlog::warn("source {}: {} items, {} parse errors", source.name, res.items.size(), res.errors.size());
  return res;
}

inline void run_news(const std::vector<SourceDescriptor>& sources, const GkgSchema& schema, RecordStore& store,
                     RunSummary& summary) {
  store.begin_stage("news");
  for (const auto& source : sources) {
    auto res = fetch_news(source, schema);
    summary.news_input_units += res.input_units;
    summary.news_parsed += res.items.size();
    summary.parse_errors += res.errors.size();
    summary.news_added += store.append_news(res.items).added;
  }
  summary.news_total = store.news().size();
}

inline std::vector<RiskEntry> risk_entries(const RecordStore& store) {
  std::map<std::string, RiskDecomposition> by_id;
  for (auto& d : store.decompositions()) by_id.emplace(d.risk_id, std::move(d));
  std::vector<RiskEntry> out;
  for (auto& r : store.risks()) {
    RiskEntry e{std::move(r), std::nullopt};
    if (auto it = by_id.find(e.record.id); it != by_id.end()) e.decomposition = it->second;
    out.push_back(std::move(e));
  }
  return out;
}

inline MatchReport run_match(const MatchConfig& config, unsigned workers, EmbeddingProvider& provider,
                             RecordStore& store, RunSummary& summary) {
  store.begin_stage("match");
  auto risks = risk_entries(store);
  auto corpus = store.news();
  summary.news_total = corpus.size();

  EmbeddingCache cache;
  auto fingerprint = provider.fingerprint();
  auto loaded = store.load_embeddings(fingerprint, corpus, cache);
  spdlog::debug("reused {} cached news embeddings", loaded);

  auto report = match_all(risks, corpus, provider, config, cache, workers);
  if (loaded != corpus.size()) store.save_embeddings(fingerprint, provider.dim(), corpus, cache);

  for (const auto& r : report.risks) {
    summary.candidates += r.candidates;
    if (r.error) {
      ++summary.match_errors;
      spdlog::warn("risk {}: {}", r.risk_id, *r.error);
    }
  }
  summary.matches = report.total_matches();
  auto jsonl = render_jsonl(report_rows(report, corpus));
  store.write_artifact(store_files::kMatches, "match/1", jsonl);
  summary.report_digest = text::hex64(text::fnv1a64(jsonl));
  return report;
}

inline std::vector<SourceDescriptor> configured_sources(const PipelineConfig& config) {
  std::vector<SourceDescriptor> out;
  for (const auto& [name, s] : config.sources) out.push_back(s);
  return out;
}

inline void write_summary(RecordStore& store, const RunSummary& summary) {
  store.write_artifact(store_files::kSummary, "summary/1", summary.to_json().dump(2) + "\n");
}

// Runs a stage; on failure records it in the summary (and the store), leaves
// the partial-run marker in place, and rethrows.
template <typename F>
auto run_stage(const std::string& name, RecordStore& store, RunSummary& summary, F&& body) {
  pipeline_detail::StageTimer timer(summary, name);
  try {
    return body();
  } catch (const std::exception& e) {
    summary.failed_stage = name;
    summary.error = e.what();
    try {
      write_summary(store, summary);
    } catch (const std::exception& inner) {
      spdlog::error("could not persist summary: {}", inner.what());
    }
    throw;
  }
}

inline RunSummary run_pipeline(const PipelineConfig& config, RecordStore& store, EmbeddingProvider& provider) {
  RunSummary summary;
  summary.config_digest = config.digest();
  if (store.interrupted_stage()) spdlog::warn("redoing run interrupted during '{}'", *store.interrupted_stage());

  if (config.risks_file)
    run_stage("ingest", store, summary, [&] { return ingest_risks(*config.risks_file, store, summary); });
  GrammarExtractor extractor(config.lexicon);
  auto decompositions =
      run_stage("extract", store, summary, [&] { return run_extract(extractor, store, summary); });
  run_stage("graph", store, summary, [&] { return run_graph(decompositions, store, summary); });
  run_stage("news", store, summary, [&] {
    run_news(configured_sources(config), config.gkg_schema, store, summary);
    return 0;
  });
  run_stage("match", store, summary,
            [&] { return run_match(config.match, config.match_workers, provider, store, summary); });

  write_summary(store, summary);
  store.set_meta("config_digest", summary.config_digest);
  store.finish_run();
  return summary;
}

}  // namespace riskradar
