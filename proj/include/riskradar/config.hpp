#pragma once
// Pipeline configuration.
//
// One `key = value` pair per line; `#` starts a comment. Keys are dotted:
//
//   store, risks, stopwords, lexicon, gkg_schema, fixtures   paths
//   encoder.{dim,word_tokens,char_trigrams,tf_weighting,hash_seed}
//   provider.{kind,endpoint,model,token_env,dim,max_batch,concurrency,
//             retries,backoff_ms,timeout_secs,requests_per_second}
//   match.{mode,threshold,top_k,keyword_prefilter,workers}
//   source.<name>.{kind,locator,format,timeout_secs,max_bytes,retries,backoff_ms}
//   serve.{addr,poll_secs}
//
// Relative paths resolve against the config file's directory. Unknown keys
// are rejected. Lexicon and GKG schema files use the same syntax.

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "riskradar/embedding.hpp"
#include "riskradar/error.hpp"
#include "riskradar/extraction.hpp"
#include "riskradar/fetch.hpp"
#include "riskradar/matcher.hpp"
#include "riskradar/newsfeed.hpp"
#include "riskradar/remote_embedding.hpp"
#include "riskradar/text.hpp"

namespace riskradar {

namespace fs = std::filesystem;

using KeyValues = std::map<std::string, std::string, std::less<>>;

inline KeyValues parse_key_values(std::string_view content, std::string_view origin) {
  KeyValues out;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    line = text::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Config, fmt::format("{}:{}: expected key = value", origin, line_no));
    std::string key(text::trim(line.substr(0, eq)));
    std::string value(text::trim(line.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorCode::Config, fmt::format("{}:{}: empty key", origin, line_no));
    if (!out.emplace(key, value).second)
      throw Error(ErrorCode::Config, fmt::format("{}:{}: duplicate key '{}'", origin, line_no, key));
  }
  return out;
}

namespace config_detail {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error(ErrorCode::Config, fmt::format("'{}' is not a valid number for {}", value, key));
  return v;
}

inline double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    double v = std::stod(std::string(value), &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::Config, fmt::format("'{}' is not a valid number for {}", value, key));
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "off" || value == "no" || value == "0") return false;
  throw Error(ErrorCode::Config, fmt::format("'{}' is not a boolean for {}", value, key));
}

inline std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> out;
  for (auto part : text::split(value, ','))
    if (auto t = text::trim(part); !t.empty()) out.emplace_back(t);
  return out;
}

inline std::string read_required(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::Config, "referenced file does not exist: " + p.string());
  return read_file(p, std::size_t{64} << 20);
}

}  // namespace config_detail

inline ExtractionLexicon parse_lexicon(std::string_view content, std::string_view origin = "lexicon") {
  ExtractionLexicon lex;
  for (const auto& [key, value] : parse_key_values(content, origin)) {
    if (key == "connectors") lex.connectors = config_detail::parse_list(value);
    else if (key == "causal_markers") lex.causal_markers = config_detail::parse_list(value);
    else if (key == "outcome_splitters") lex.outcome_splitters = config_detail::parse_list(value);
    else throw Error(ErrorCode::Config, fmt::format("{}: unknown lexicon key '{}'", origin, key));
  }
  lex.validate();
  return lex;
}

inline GkgSchema parse_gkg_schema(std::string_view content, std::string_view origin = "gkg schema") {
  GkgSchema schema;
  static const std::map<std::string, GkgField, std::less<>> fields{
      {"record_id", GkgField::RecordId},     {"date", GkgField::Date},     {"source_name", GkgField::SourceName},
      {"document_url", GkgField::DocumentUrl}, {"themes", GkgField::Themes}, {"tone", GkgField::Tone}};
  for (const auto& [key, value] : parse_key_values(content, origin)) {
    if (key == "field_count") {
      schema.field_count = config_detail::parse_number<std::size_t>(key, value);
    } else if (auto it = fields.find(key); it != fields.end()) {
      schema.index_of[it->second] = config_detail::parse_number<std::size_t>(key, value);
    } else {
      throw Error(ErrorCode::Config, fmt::format("{}: unknown schema key '{}'", origin, key));
    }
  }
  schema.validate();
  return schema;
}

struct ProviderConfig {
  std::string kind = "hashing";  // hashing | remote
  RemoteProviderConfig remote;
  std::string token_env;  // environment variable holding the bearer token
};

struct PipelineConfig {
  fs::path config_path;
  fs::path store_root;
  std::optional<fs::path> risks_file;
  std::optional<fs::path> stopwords_file;
  std::optional<fs::path> lexicon_file;
  std::optional<fs::path> gkg_schema_file;
  std::optional<fs::path> fixtures_dir;

  ExtractionLexicon lexicon;
  GkgSchema gkg_schema;
  EncoderConfig encoder;
  ProviderConfig provider;
  MatchConfig match;
  unsigned match_workers = 1;
  std::map<std::string, SourceDescriptor> sources;  // by name

  std::string serve_addr = "127.0.0.1:8080";
  std::optional<std::chrono::seconds> poll_interval;

  KeyValues raw;  // as written, for the digest

  // FNV-1a-64 over the canonical key = value listing.
  std::string digest() const {
    std::string canonical;
    for (const auto& [k, v] : raw) canonical += k + "=" + v + "\n";
    return text::hex64(text::fnv1a64(canonical));
  }

  std::unique_ptr<EmbeddingProvider> make_provider() const {
    if (provider.kind == "hashing") return std::make_unique<HashingEncoder>(encoder);
    auto remote = provider.remote;
    if (!provider.token_env.empty())
      if (const char* token = std::getenv(provider.token_env.c_str())) remote.bearer_token = token;
    return std::make_unique<RemoteEncoder>(remote);
  }
};

namespace config_detail {

inline void apply_source_key(SourceDescriptor& s, std::string_view field, std::string_view key,
                             const std::string& value, const fs::path& base) {
  if (field == "kind") s.kind = source_kind_from_string(value);
  else if (field == "locator") s.locator = is_http_url(value) ? value : (base / value).lexically_normal().string();
  else if (field == "format") s.format = payload_format_from_string(value);
  else if (field == "timeout_secs") s.timeout = std::chrono::seconds(parse_number<long>(key, value));
  else if (field == "max_bytes") s.max_bytes = parse_number<std::size_t>(key, value);
  else if (field == "retries") s.retries = parse_number<int>(key, value);
  else if (field == "backoff_ms") s.backoff = std::chrono::milliseconds(parse_number<long>(key, value));
  else throw Error(ErrorCode::Config, fmt::format("unknown key '{}'", key));
}

}  // namespace config_detail

inline PipelineConfig load_config_text(std::string_view content, const fs::path& config_path) {
  using namespace config_detail;
  PipelineConfig cfg;
  cfg.config_path = config_path;
  cfg.raw = parse_key_values(content, config_path.string());
  const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  auto path_of = [&](const std::string& v) { return (base / v).lexically_normal(); };

  for (const auto& [key, value] : cfg.raw) {
    std::string_view k = key;
    if (k == "store") cfg.store_root = path_of(value);
    else if (k == "risks") cfg.risks_file = path_of(value);
    else if (k == "stopwords") cfg.stopwords_file = path_of(value);
    else if (k == "lexicon") cfg.lexicon_file = path_of(value);
    else if (k == "gkg_schema") cfg.gkg_schema_file = path_of(value);
    else if (k == "fixtures") cfg.fixtures_dir = path_of(value);
    else if (k == "encoder.dim") cfg.encoder.dim = parse_number<std::size_t>(k, value);
    else if (k == "encoder.word_tokens") cfg.encoder.use_word_tokens = parse_bool(k, value);
    else if (k == "encoder.char_trigrams") cfg.encoder.use_char_trigrams = parse_bool(k, value);
    else if (k == "encoder.tf_weighting") {
      if (value == "raw") cfg.encoder.tf_weighting = TfWeighting::Raw;
      else if (value == "sublinear") cfg.encoder.tf_weighting = TfWeighting::Sublinear;
      else throw Error(ErrorCode::Config, "encoder.tf_weighting must be raw or sublinear");
    } else if (k == "encoder.hash_seed") cfg.encoder.hash_seed = parse_number<std::uint64_t>(k, value);
    else if (k == "provider.kind") {
      if (value != "hashing" && value != "remote") throw Error(ErrorCode::Config, "provider.kind must be hashing or remote");
      cfg.provider.kind = value;
    } else if (k == "provider.endpoint") cfg.provider.remote.endpoint = value;
    else if (k == "provider.model") cfg.provider.remote.model = value;
    else if (k == "provider.token_env") cfg.provider.token_env = value;
    else if (k == "provider.dim") cfg.provider.remote.dim = parse_number<std::size_t>(k, value);
    else if (k == "provider.max_batch") cfg.provider.remote.max_batch = parse_number<std::size_t>(k, value);
    else if (k == "provider.concurrency") cfg.provider.remote.concurrency = parse_number<int>(k, value);
    else if (k == "provider.retries") cfg.provider.remote.retries = parse_number<int>(k, value);
    else if (k == "provider.backoff_ms") cfg.provider.remote.backoff = std::chrono::milliseconds(parse_number<long>(k, value));
    else if (k == "provider.timeout_secs") cfg.provider.remote.timeout = std::chrono::seconds(parse_number<long>(k, value));
    else if (k == "provider.requests_per_second") cfg.provider.remote.max_requests_per_second = parse_double(k, value);
    else if (k == "match.mode") cfg.match.mode = query_mode_from_string(value);
    else if (k == "match.threshold") cfg.match.threshold = parse_double(k, value);
    else if (k == "match.top_k") cfg.match.top_k = parse_number<std::size_t>(k, value);
    else if (k == "match.keyword_prefilter") cfg.match.keyword_prefilter = parse_bool(k, value);
    else if (k == "match.workers") cfg.match_workers = parse_number<unsigned>(k, value);
    else if (k == "serve.addr") cfg.serve_addr = value;
    else if (k == "serve.poll_secs") {
      auto secs = parse_number<long>(k, value);
      if (secs > 0) cfg.poll_interval = std::chrono::seconds(secs);
    } else if (k.rfind("source.", 0) == 0) {
      auto rest = k.substr(7);
      auto dot = rest.rfind('.');
      if (dot == std::string_view::npos || dot == 0) throw Error(ErrorCode::Config, fmt::format("unknown key '{}'", k));
      std::string name(rest.substr(0, dot));
      auto& src = cfg.sources[name];
      src.name = name;
      apply_source_key(src, rest.substr(dot + 1), k, value, base);
    } else {
      throw Error(ErrorCode::Config, fmt::format("unknown key '{}'", k));
    }
  }

  if (cfg.store_root.empty()) throw Error(ErrorCode::Config, "config must set 'store'");
  if (cfg.risks_file && !fs::is_regular_file(*cfg.risks_file))
    throw Error(ErrorCode::Config, "referenced file does not exist: " + cfg.risks_file->string());
  if (cfg.stopwords_file) cfg.match.stopwords = parse_stopwords(read_required(*cfg.stopwords_file));
  if (cfg.lexicon_file) cfg.lexicon = parse_lexicon(read_required(*cfg.lexicon_file), cfg.lexicon_file->string());
  if (cfg.gkg_schema_file)
    cfg.gkg_schema = parse_gkg_schema(read_required(*cfg.gkg_schema_file), cfg.gkg_schema_file->string());
  if (cfg.fixtures_dir && !fs::is_directory(*cfg.fixtures_dir))
    throw Error(ErrorCode::Config, "fixtures directory does not exist: " + cfg.fixtures_dir->string());
  for (const auto& [name, src] : cfg.sources) {
    if (src.locator.empty()) throw Error(ErrorCode::Config, "source '" + name + "' has no locator");
    if (!is_http_url(src.locator) && !fs::is_regular_file(src.locator))
      throw Error(ErrorCode::Config, "source '" + name + "' file does not exist: " + src.locator);
  }
  if (cfg.provider.kind == "remote" && cfg.provider.remote.endpoint.empty())
    throw Error(ErrorCode::Config, "provider.endpoint is required for a remote provider");
  cfg.encoder.validate();
  cfg.match.validate();
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::Config, "config file not found: " + path.string());
  return load_config_text(read_file(path, std::size_t{1} << 20), path);
}

}  // namespace riskradar
