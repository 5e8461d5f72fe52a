// riskradar command-line interface.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 network error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "riskradar/config.hpp"
#include "riskradar/evaluation.hpp"
#include "riskradar/pipeline.hpp"
#include "riskradar/server.hpp"
#include "riskradar/store.hpp"

namespace fs = std::filesystem;
using namespace riskradar;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string store_override;
  bool verbose = false;
  bool quiet = false;
};

struct MatchOverrides {
  std::optional<std::string> mode;
  std::optional<double> threshold;
  std::optional<std::size_t> top_k;
  bool no_prefilter = false;

  void apply(MatchConfig& m) const {
    if (mode) m.mode = query_mode_from_string(*mode);
    if (threshold) m.threshold = *threshold;
    if (top_k) m.top_k = *top_k;
    if (no_prefilter) m.keyword_prefilter = false;
    m.validate();
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "Query mode: full_text, trigger_only, trigger_plus_outcome");
    cmd->add_option("--threshold", threshold, "Minimum cosine score");
    cmd->add_option("--top-k", top_k, "Results kept per risk");
    cmd->add_flag("--no-prefilter", no_prefilter, "Disable the keyword prefilter");
  }
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("RISKRADAR_CONFIG")) path = env;
  if (path.empty() && fs::exists("riskradar.conf")) path = "riskradar.conf";

  PipelineConfig cfg;
  if (!path.empty()) {
    cfg = load_config(path);
  } else if (g.store_override.empty()) {
    throw Error(ErrorCode::Usage, "no config: pass --config, set RISKRADAR_CONFIG, or pass --store");
  }
  if (!g.store_override.empty()) cfg.store_root = g.store_override;
  return cfg;
}

void write_output(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + out);
  f << content;
  if (!f) throw Error(ErrorCode::Io, "short write on " + out);
}

void print_summary(const RunSummary& s) { std::cout << s.to_json().dump(2) << "\n"; }

std::pair<std::string, int> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::Usage, "address must be HOST:PORT");
  auto port = config_detail::parse_number<int>("--addr", std::string_view(addr).substr(colon + 1));
  if (port < 0 || port > 65535) throw Error(ErrorCode::Usage, "port out of range");
  return {addr.substr(0, colon), port};
}

std::vector<RiskEntry> decomposed(const std::vector<RiskRecord>& records, const ExtractionLexicon& lexicon) {
  std::vector<RiskEntry> out;
  for (const auto& r : records) {
    RiskEntry e{r, std::nullopt};
    try {
      e.decomposition = decompose_risk(r, lexicon);
    } catch (const Error& err) {
      spdlog::warn("risk {}: {}", r.id, err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("riskradar");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"riskradar: risk decomposition, knowledge graph and news matching"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file (default: $RISKRADAR_CONFIG or ./riskradar.conf)");
  app.add_option("--store", g.store_override, "Store root, overriding the config");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Errors only");

  auto* ingest = app.add_subcommand("ingest-risks", "Append risks from a plain-text or JSON-lines file");
  std::string risks_file;
  ingest->add_option("--file", risks_file, "Risk repository file")->required();

  auto* extract = app.add_subcommand("extract", "Decompose stored risks and rebuild the graph");

  auto* graph = app.add_subcommand("graph", "Knowledge graph commands");
  graph->require_subcommand(1);
  auto* graph_export = graph->add_subcommand("export", "Export the graph");
  std::string graph_format = "json", graph_out;
  graph_export->add_option("--format", graph_format, "dot or json")->check(CLI::IsMember({"dot", "json"}));
  graph_export->add_option("--out", graph_out, "Output file (default stdout)");

  auto* news = app.add_subcommand("news", "News commands");
  news->require_subcommand(1);
  auto* news_fetch = news->add_subcommand("fetch", "Fetch, parse and store news from one source");
  std::string source_name, fixture_path, schema_path, payload_format = "auto";
  std::optional<std::size_t> max_bytes;
  std::optional<long> timeout_secs;
  auto* src_opt = news_fetch->add_option("--source", source_name, "Configured source name");
  auto* fix_opt = news_fetch->add_option("--fixture", fixture_path, "Local GKG or feed file");
  src_opt->excludes(fix_opt);
  news_fetch->add_option("--schema", schema_path, "GKG schema file");
  news_fetch->add_option("--max-bytes", max_bytes, "Payload size cap");
  news_fetch->add_option("--timeout-secs", timeout_secs, "Network timeout");
  news_fetch->add_option("--format", payload_format, "auto, gkg or feed")->check(CLI::IsMember({"auto", "gkg", "feed"}));

  auto* match = app.add_subcommand("match", "Score stored news against stored risks");
  MatchOverrides match_overrides;
  match_overrides.attach(match);

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  MatchOverrides run_overrides;
  run_overrides.attach(run);

  auto* report = app.add_subcommand("report", "Print the last match report");
  std::string report_format = "jsonl", report_out;
  report->add_option("--format", report_format, "jsonl or md")->check(CLI::IsMember({"jsonl", "md"}));
  report->add_option("--out", report_out, "Output file (default stdout)");

  auto* serve = app.add_subcommand("serve", "Serve the last completed run over HTTP (read-only)");
  std::string serve_addr;
  serve->add_option("--addr", serve_addr, "HOST:PORT (default from config)");

  auto* evaluate = app.add_subcommand("eval", "Precision@k on a generated labeled corpus");
  std::string eval_risks;
  std::size_t eval_k = 10;
  std::uint64_t eval_seed = 7;
  bool eval_prefilter = false;
  std::string eval_mode = "full_text";
  evaluate->add_option("--risks", eval_risks, "Risk file (default: risks in the store)");
  evaluate->add_option("--k", eval_k, "Cut-off k");
  evaluate->add_option("--seed", eval_seed, "Corpus seed");
  evaluate->add_option("--mode", eval_mode, "Query mode");
  evaluate->add_flag("--prefilter", eval_prefilter, "Enable the keyword prefilter");

  auto* gen = app.add_subcommand("gen-corpus", "Write the generated labeled corpus");
  std::string gen_risks, gen_out, gen_labels, gen_format = "gkg";
  std::uint64_t gen_seed = 7;
  std::size_t gen_total = 1000;
  gen->add_option("--risks", gen_risks, "Risk file")->required();
  gen->add_option("--out", gen_out, "Output file")->required();
  gen->add_option("--labels", gen_labels, "Write relevance labels as JSON");
  gen->add_option("--format", gen_format, "gkg or jsonl")->check(CLI::IsMember({"gkg", "jsonl"}));
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--total", gen_total, "Corpus size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  spdlog::set_level(g.verbose ? spdlog::level::debug : g.quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (*ingest) {
      auto cfg = resolve_config(g);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadWrite);
      RunSummary s;
      s.config_digest = cfg.digest();
      ingest_risks(risks_file, store, s);
      store.finish_run();
      print_summary(s);
    } else if (*extract) {
      auto cfg = resolve_config(g);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadWrite);
      RunSummary s;
      s.config_digest = cfg.digest();
      GrammarExtractor extractor(cfg.lexicon);
      auto ds = run_extract(extractor, store, s);
      run_graph(ds, store, s);
      store.finish_run();
      print_summary(s);
    } else if (*graph_export) {
      auto cfg = resolve_config(g);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadOnly);
      auto ds = store.decompositions();
      if (ds.empty() && !store.has_file(store_files::kDecompositions))
        throw Error(ErrorCode::InvalidInput, "no decompositions in store; run extract first");
      write_output(graph_out, export_graph(build_graph(ds), graph_format_from_string(graph_format)));
    } else if (*news_fetch) {
      auto cfg = resolve_config(g);
      SourceDescriptor source;
      if (!source_name.empty()) {
        auto it = cfg.sources.find(source_name);
        if (it == cfg.sources.end()) throw Error(ErrorCode::Usage, "no source named '" + source_name + "' in config");
        source = it->second;
      } else if (!fixture_path.empty()) {
        source.name = fixture_path;
        source.kind = SourceKind::GdeltFile;  // unwrap zip fixtures too
        source.locator = fixture_path;
      } else {
        throw Error(ErrorCode::Usage, "news fetch needs --source or --fixture");
      }
      if (max_bytes) source.max_bytes = *max_bytes;
      if (timeout_secs) source.timeout = std::chrono::seconds(*timeout_secs);
      if (payload_format != "auto") source.format = payload_format_from_string(payload_format);
      GkgSchema schema = cfg.gkg_schema;
      if (!schema_path.empty()) schema = parse_gkg_schema(read_file(schema_path, 1 << 20), schema_path);

      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadWrite);
      RunSummary s;
      s.config_digest = cfg.digest();
      run_news({source}, schema, store, s);
      store.finish_run();
      print_summary(s);
    } else if (*match) {
      auto cfg = resolve_config(g);
      match_overrides.apply(cfg.match);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadWrite);
      auto provider = cfg.make_provider();
      RunSummary s;
      s.config_digest = cfg.digest();
      run_match(cfg.match, cfg.match_workers, *provider, store, s);
      store.finish_run();
      print_summary(s);
    } else if (*run) {
      auto cfg = resolve_config(g);
      run_overrides.apply(cfg.match);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadWrite);
      auto provider = cfg.make_provider();
      print_summary(run_pipeline(cfg, store, *provider));
    } else if (*report) {
      auto cfg = resolve_config(g);
      auto store = RecordStore::open(cfg.store_root, StoreMode::ReadOnly);
      if (!store.has_file(store_files::kMatches)) throw Error(ErrorCode::InvalidInput, "no match report; run match first");
      auto rows = store.match_rows();
      write_output(report_out, report_format == "md" ? render_markdown(rows) : render_jsonl(rows));
    } else if (*serve) {
      auto cfg = resolve_config(g);
      auto [host, port] = split_addr(serve_addr.empty() ? cfg.serve_addr : serve_addr);
      std::shared_ptr<const ServeSnapshot> snap;
      {
        auto store = RecordStore::open(cfg.store_root, StoreMode::ReadOnly);
        snap = load_snapshot(store);
      }
      ApiServer server(snap);
      int bound = server.bind(host, port);
      if (cfg.poll_interval) server.start_polling(cfg, cfg.make_provider(), *cfg.poll_interval);
      spdlog::info("serving {} on {}:{}", cfg.store_root.string(), host, bound);
      server.serve();
    } else if (*evaluate) {
      std::vector<RiskRecord> records;
      ExtractionLexicon lexicon;
      MatchConfig mc;
      std::unique_ptr<EmbeddingProvider> provider;
      if (!eval_risks.empty()) {
        records = parse_risk_repository(read_file(eval_risks, 64 << 20), "eval");
        provider = std::make_unique<HashingEncoder>();
      } else {
        auto cfg = resolve_config(g);
        records = RecordStore::open(cfg.store_root, StoreMode::ReadOnly).risks();
        lexicon = cfg.lexicon;
        mc = cfg.match;
        provider = cfg.make_provider();
      }
      mc.mode = query_mode_from_string(eval_mode);
      mc.top_k = eval_k;
      mc.keyword_prefilter = eval_prefilter;
      auto risks = decomposed(records, lexicon);
      eval::CorpusSpec spec;
      spec.seed = eval_seed;
      auto corpus = eval::generate_corpus(risks, spec);
      auto ev = eval::evaluate(risks, corpus, *provider, mc);
      std::cout << fmt::format("synthetic corpus: {} items, seed {} (labels are constructed; not comparable with "
                               "accuracy on real analyst-vetted news)\n",
                               corpus.items.size(), eval_seed);
      for (const auto& r : ev.per_risk) std::cout << fmt::format("{}\tprecision@{}\t{:.4f}\n", r.risk_id, ev.k, r.precision_at_k);
      std::cout << fmt::format("mean\tprecision@{}\t{:.4f}\n", ev.k, ev.mean_precision());
      for (const auto& [t, a] : ev.accuracy_sweep) std::cout << fmt::format("threshold {:.2f}\taccuracy {:.4f}\n", t, a);
    } else if (*gen) {
      auto records = parse_risk_repository(read_file(gen_risks, 64 << 20), "gen");
      auto risks = decomposed(records, {});
      eval::CorpusSpec spec;
      spec.seed = gen_seed;
      spec.total = gen_total;
      auto corpus = eval::generate_corpus(risks, spec);
      std::string content;
      if (gen_format == "gkg") {
        content = eval::render_gkg(corpus.items);
      } else {
        for (const auto& n : corpus.items) content += nlohmann::json(n).dump() + "\n";
      }
      write_output(gen_out, content);
      if (!gen_labels.empty()) write_output(gen_labels, nlohmann::json(corpus.relevant).dump(2) + "\n");
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
