#pragma once
// News ingestion: GDELT GKG 2.1 records, RSS 2.0 / Atom feeds, and the
// keyword candidate filter derived from a risk's trigger.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "riskradar/error.hpp"
#include "riskradar/extraction.hpp"
#include "riskradar/text.hpp"
#include "riskradar/timeutil.hpp"

namespace riskradar {

struct NewsItem {
  std::string id;
  std::string headline;
  std::string url;
  std::string source;
  std::optional<timeutil::Seconds> published_at;
  std::string language = "und";
  std::vector<std::string> themes;

  bool operator==(const NewsItem&) const = default;
};

// Lowercase hex FNV-1a-64 of url + "\n" + headline.
inline std::string news_id(std::string_view url, std::string_view headline) {
  std::uint64_t h = text::fnv1a64(url);
  h = text::fnv1a64("\n", h);
  return text::hex64(text::fnv1a64(headline, h));
}

inline NewsItem make_news_item(std::string headline, std::string url, std::string source,
                               std::optional<timeutil::Seconds> published_at, std::string language = "und",
                               std::vector<std::string> themes = {}) {
  NewsItem item;
  item.id = news_id(url, headline);
  item.headline = std::move(headline);
  item.url = std::move(url);
  item.source = std::move(source);
  item.published_at = published_at;
  item.language = std::move(language);
  item.themes = std::move(themes);
  return item;
}

enum class ParseErrorKind { WrongFieldCount, BadTimestamp, EmptyUrl, MalformedDocument, MissingTitle };

constexpr std::string_view to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::WrongFieldCount: return "wrong_field_count";
    case ParseErrorKind::BadTimestamp: return "bad_timestamp";
    case ParseErrorKind::EmptyUrl: return "empty_url";
    case ParseErrorKind::MalformedDocument: return "malformed_document";
    case ParseErrorKind::MissingTitle: return "missing_title";
  }
  return "";
}

struct ParseError {
  ParseErrorKind kind;
  std::size_t line = 0;  // 1-based line (GKG) or item index (feeds); 0 for document level
  std::string reason;
};

enum class GkgField { RecordId, Date, SourceName, DocumentUrl, Themes, Tone };

constexpr std::string_view to_string(GkgField f) {
  switch (f) {
    case GkgField::RecordId: return "record_id";
    case GkgField::Date: return "date";
    case GkgField::SourceName: return "source_name";
    case GkgField::DocumentUrl: return "document_url";
    case GkgField::Themes: return "themes";
    case GkgField::Tone: return "tone";
  }
  return "";
}

struct GkgSchema {
  std::size_t field_count = 27;
  // GKG 2.1 codebook: GKGRECORDID, V2.1DATE, V2SOURCECOLLECTIONIDENTIFIER,
  // V2SOURCECOMMONNAME, V2DOCUMENTIDENTIFIER, V1COUNTS, V2.1COUNTS, V1THEMES,
  // ..., V1.5TONE at 15, ..., V2EXTRASXML at 26.
  std::map<GkgField, std::size_t> index_of{{GkgField::RecordId, 0},   {GkgField::Date, 1},
                                           {GkgField::SourceName, 3}, {GkgField::DocumentUrl, 4},
                                           {GkgField::Themes, 7},     {GkgField::Tone, 15}};

  void validate() const {
    std::set<std::size_t> seen;
    for (GkgField f : {GkgField::RecordId, GkgField::Date, GkgField::SourceName, GkgField::DocumentUrl,
                       GkgField::Themes, GkgField::Tone}) {
      auto it = index_of.find(f);
      if (it == index_of.end())
        throw Error(ErrorCode::Config, "GKG schema is missing index for " + std::string(to_string(f)));
      if (it->second >= field_count)
        throw Error(ErrorCode::Config, "GKG schema index for " + std::string(to_string(f)) + " out of range");
      if (!seen.insert(it->second).second) throw Error(ErrorCode::Config, "GKG schema indices are not distinct");
    }
  }

  std::size_t at(GkgField f) const { return index_of.at(f); }
};

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int hi = hex_value(s[i + 1]), lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

struct UrlParts {
  std::string host;
  std::string path;
};

inline UrlParts split_url(std::string_view url) {
  url = text::trim(url);
  if (auto scheme = url.find("://"); scheme != std::string_view::npos) url.remove_prefix(scheme + 3);
  auto host_end = url.find_first_of("/?#");
  std::string_view host = url.substr(0, host_end);
  if (auto at = host.rfind('@'); at != std::string_view::npos) host.remove_prefix(at + 1);
  if (auto colon = host.find(':'); colon != std::string_view::npos) host = host.substr(0, colon);
  UrlParts parts{text::to_lower(host), {}};
  if (host_end != std::string_view::npos && url[host_end] == '/') {
    std::string_view path = url.substr(host_end);
    path = path.substr(0, path.find_first_of("?#"));
    parts.path = std::string(path);
  }
  return parts;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

// Headline derived from the final URL path segment: extension stripped,
// separators to spaces, numeric-only tokens dropped, lowercased. Falls back
// to the host when nothing survives.
inline std::string headline_from_url(std::string_view url) {
  auto parts = detail::split_url(url);
  std::string segment;
  for (auto seg : text::split(parts.path, '/'))
    if (!seg.empty()) segment = std::string(seg);
  segment = detail::percent_decode(segment);

  if (auto dot = segment.rfind('.'); dot != std::string::npos && dot > 0) {
    std::string_view ext = std::string_view(segment).substr(dot + 1);
    if (!ext.empty() && ext.size() <= 5 && std::all_of(ext.begin(), ext.end(), text::is_ascii_alnum))
      segment.resize(dot);
  }
  for (char& c : segment)
    if (!text::is_word_char(c)) c = ' ';

  std::vector<std::string> kept;
  for (auto tok : text::split_whitespace(segment))
    if (!detail::all_digits(tok)) kept.push_back(text::to_lower(tok));
  std::string headline = text::join(kept, " ");
  return headline.empty() ? parts.host : headline;
}

inline std::string host_of(std::string_view url) { return detail::split_url(url).host; }

using GkgLineResult = std::variant<NewsItem, ParseError>;

inline GkgLineResult parse_gkg_line(std::string_view line, const GkgSchema& schema = {},
                                    std::size_t line_number = 0) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto fields = text::split(line, '\t');
  if (fields.size() != schema.field_count)
    return ParseError{ParseErrorKind::WrongFieldCount, line_number,
                      fmt::format("expected {} fields, found {}", schema.field_count, fields.size())};

  std::string url(text::trim(fields[schema.at(GkgField::DocumentUrl)]));
  if (url.empty()) return ParseError{ParseErrorKind::EmptyUrl, line_number, "document url is empty"};

  std::string_view date = text::trim(fields[schema.at(GkgField::Date)]);
  auto published = timeutil::parse_compact(date);
  if (!published)
    return ParseError{ParseErrorKind::BadTimestamp, line_number,
                      fmt::format("date '{}' is not YYYYMMDDHHMMSS", date.substr(0, 32))};

  std::vector<std::string> themes;
  for (auto theme : text::split(fields[schema.at(GkgField::Themes)], ';')) {
    // V2 enhanced themes carry ",<char offset>" suffixes.
    theme = text::trim(theme.substr(0, theme.find(',')));
    if (!theme.empty()) themes.emplace_back(theme);
  }

  std::string source(text::trim(fields[schema.at(GkgField::SourceName)]));
  if (source.empty()) source = host_of(url);
  std::string headline = headline_from_url(url);
  if (headline.empty()) return ParseError{ParseErrorKind::EmptyUrl, line_number, "document url has no host or path"};
  return make_news_item(std::move(headline), std::move(url), std::move(source), published, "und",
                        std::move(themes));
}

struct NewsParseResult {
  std::vector<NewsItem> items;
  std::vector<ParseError> errors;
  std::size_t input_units = 0;  // lines for GKG, items/entries for feeds
};

inline NewsParseResult parse_gkg(std::string_view content, const GkgSchema& schema = {}) {
  NewsParseResult out;
  if (content.empty()) return out;
  auto lines = text::split(content, '\n');
  if (lines.back().empty()) lines.pop_back();
  out.input_units = lines.size();
  std::size_t line_no = 0;
  for (auto line : lines) {
    ++line_no;
    auto r = parse_gkg_line(line, schema, line_no);
    if (auto* item = std::get_if<NewsItem>(&r))
      out.items.push_back(std::move(*item));
    else
      out.errors.push_back(std::get<ParseError>(std::move(r)));
  }
  return out;
}

namespace detail {

using boost::property_tree::ptree;

inline constexpr int kMaxXmlDepth = 256;

// Rough element nesting depth, computed before handing the document to the
// recursive XML parser.
inline int approximate_xml_depth(std::string_view xml) {
  int depth = 0, max_depth = 0;
  for (std::size_t i = 0; i + 1 < xml.size(); ++i) {
    if (xml[i] != '<') continue;
    char next = xml[i + 1];
    if (next == '/') {
      --depth;
    } else if (next != '?' && next != '!') {
      auto close = xml.find('>', i);
      if (close == std::string_view::npos) break;
      if (xml[close - 1] != '/') max_depth = std::max(max_depth, ++depth);
      i = close;
    }
  }
  return max_depth;
}

inline std::string collapse(std::string_view s) { return text::join(text::split_whitespace(s), " "); }

inline std::string child_text(const ptree& node, const std::string& name) {
  auto child = node.get_child_optional(name);
  return child ? collapse(child->data()) : std::string();
}

inline std::string attr(const ptree& node, const std::string& name) {
  auto v = node.get_optional<std::string>("<xmlattr>." + name);
  return v ? std::string(text::trim(*v)) : std::string();
}

inline std::optional<timeutil::Seconds> feed_time(std::string_view s) {
  if (auto t = timeutil::parse_rfc822(s)) return t;
  return timeutil::parse_rfc3339(s);
}

inline std::string atom_link(const ptree& entry) {
  std::string first;
  for (const auto& [name, child] : entry) {
    if (name != "link") continue;
    std::string href = attr(child, "href");
    if (href.empty()) href = collapse(child.data());
    std::string rel = attr(child, "rel");
    if (rel.empty() || rel == "alternate") return href;
    if (first.empty()) first = href;
  }
  return first;
}

inline void parse_rss(const ptree& rss, NewsParseResult& out) {
  auto channel = rss.get_child_optional("channel");
  if (!channel) return;
  std::string feed_title = child_text(*channel, "title");
  std::string language = child_text(*channel, "language");
  if (language.empty()) language = "und";

  for (const auto& [name, item] : *channel) {
    if (name != "item") continue;
    ++out.input_units;
    std::string title = child_text(item, "title");
    if (title.empty()) {
      out.errors.push_back({ParseErrorKind::MissingTitle, out.input_units, "item has no title"});
      continue;
    }
    std::string date = child_text(item, "pubDate");
    if (date.empty()) date = child_text(item, "dc:date");
    std::string source = child_text(item, "source");
    if (source.empty()) source = feed_title;
    std::vector<std::string> themes;
    for (const auto& [cname, cat] : item)
      if (cname == "category" && !collapse(cat.data()).empty()) themes.push_back(collapse(cat.data()));
    out.items.push_back(
        make_news_item(title, child_text(item, "link"), source, feed_time(date), language, std::move(themes)));
  }
}

inline void parse_atom(const ptree& feed, NewsParseResult& out) {
  std::string feed_title = child_text(feed, "title");
  std::string feed_lang = attr(feed, "xml:lang");
  for (const auto& [name, entry] : feed) {
    if (name != "entry") continue;
    ++out.input_units;
    std::string title = child_text(entry, "title");
    if (title.empty()) {
      out.errors.push_back({ParseErrorKind::MissingTitle, out.input_units, "entry has no title"});
      continue;
    }
    std::string date = child_text(entry, "updated");
    if (date.empty()) date = child_text(entry, "published");
    std::string source;
    if (auto src = entry.get_child_optional("source")) source = child_text(*src, "title");
    if (source.empty()) source = feed_title;
    std::string language = attr(entry, "xml:lang");
    if (language.empty()) language = feed_lang.empty() ? "und" : feed_lang;
    std::vector<std::string> themes;
    for (const auto& [cname, cat] : entry) {
      if (cname != "category") continue;
      std::string term = attr(cat, "term");
      if (!term.empty()) themes.push_back(term);
    }
    out.items.push_back(make_news_item(title, atom_link(entry), source, feed_time(date), language, std::move(themes)));
  }
}

}  // namespace detail

// RSS 2.0 or Atom. A malformed document yields exactly one fatal error and no
// items; per-item defects are recorded and parsing continues.
inline NewsParseResult parse_feed(std::string_view xml) {
  NewsParseResult out;
  auto fatal = [&](std::string reason) {
    out.items.clear();
    out.errors.assign(1, ParseError{ParseErrorKind::MalformedDocument, 0, std::move(reason)});
    out.input_units = 1;
    return out;
  };
  if (xml.substr(0, 3) == "\xEF\xBB\xBF") xml.remove_prefix(3);
  xml = text::trim(xml);
  if (detail::approximate_xml_depth(xml) > detail::kMaxXmlDepth) return fatal("element nesting too deep");

  detail::ptree doc;
  try {
    std::istringstream in{std::string(xml)};
    boost::property_tree::read_xml(in, doc, boost::property_tree::xml_parser::no_comments);
  } catch (const std::exception& e) {
    return fatal(e.what());
  }

  try {
    if (auto rss = doc.get_child_optional("rss"))
      detail::parse_rss(*rss, out);
    else if (auto rdf = doc.get_child_optional("rdf:RDF"))
      detail::parse_rss(*rdf, out);
    else if (auto feed = doc.get_child_optional("feed"))
      detail::parse_atom(*feed, out);
    else
      return fatal("document root is neither <rss> nor <feed>");
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keywords

enum class KeywordField { Trigger, Outcome, Vessel };

using StopwordSet = std::set<std::string, std::less<>>;

// Versioned in-repo list ("stopwords/1"); fixtures/stopwords.txt mirrors it.
inline const StopwordSet& default_stopwords() {
  static const StopwordSet words{
      "a",     "about", "after", "against", "all",   "an",    "and",   "are",   "as",    "at",
      "be",    "been",  "before", "between", "but",  "by",    "can",   "could", "during", "for",
      "from",  "had",   "has",   "have",    "he",    "her",   "his",   "in",    "into",  "is",
      "it",    "its",   "may",   "more",    "no",    "not",   "of",    "on",    "or",    "our",
      "over",  "said",  "says",  "she",     "than",  "that",  "the",   "their", "there", "these",
      "they",  "this",  "those", "to",      "under", "was",   "we",    "were",  "will",  "with",
      "would", "you",   "your"};
  return words;
}

inline StopwordSet parse_stopwords(std::string_view content) {
  StopwordSet out;
  for (auto line : text::split(content, '\n')) {
    line = text::trim(line.substr(0, line.find('#')));
    if (!line.empty()) out.insert(text::to_lower(line));
  }
  return out;
}

struct KeywordSet {
  std::string risk_id;
  std::set<std::string> keywords;
  std::set<KeywordField> source_fields;
};

inline KeywordSet build_keywords(const RiskDecomposition& d, const StopwordSet& stopwords = default_stopwords(),
                                 const std::set<KeywordField>& fields = {KeywordField::Trigger}) {
  if (d.trigger.empty()) throw Error(ErrorCode::InvalidInput, "risk '" + d.risk_id + "' has no trigger");
  KeywordSet out{d.risk_id, {}, fields};
  auto add_phrase = [&](const CanonicalPhrase& phrase) {
    for (auto tok : text::split_whitespace(phrase.str())) {
      std::string word = text::to_lower(text::strip_punct(tok));
      if (word.size() < 3 || stopwords.count(word)) continue;
      out.keywords.insert(std::move(word));
    }
  };
  if (fields.count(KeywordField::Trigger)) add_phrase(d.trigger);
  if (fields.count(KeywordField::Outcome))
    for (const auto& o : d.outcomes) add_phrase(o);
  if (fields.count(KeywordField::Vessel))
    for (const auto& v : d.exposure_vessels) add_phrase(v);
  if (out.keywords.empty())
    throw Error(ErrorCode::EmptyKeywordSet, "risk '" + d.risk_id + "' produced no keywords");
  return out;
}

namespace detail {

inline void add_with_parts(std::set<std::string, std::less<>>& into, const std::string& token, char sep) {
  if (token.empty()) return;
  into.insert(token);
  for (auto part : text::split(token, sep))
    if (!part.empty()) into.emplace(part);
}

}  // namespace detail

// Keywords in fused and hyphen-split form.
inline std::set<std::string, std::less<>> expand_keywords(const KeywordSet& keys) {
  std::set<std::string, std::less<>> out;
  for (const auto& k : keys.keywords) detail::add_with_parts(out, k, '-');
  return out;
}

inline std::set<std::string, std::less<>> item_match_tokens(const NewsItem& item) {
  std::set<std::string, std::less<>> out;
  for (const auto& tok : text::word_tokens(item.headline)) detail::add_with_parts(out, tok, '-');
  for (const auto& theme : item.themes) detail::add_with_parts(out, text::to_lower(theme), '_');
  return out;
}

inline bool keyword_match(const NewsItem& item, const std::set<std::string, std::less<>>& expanded) {
  for (const auto& tok : item_match_tokens(item))
    if (expanded.count(tok)) return true;
  return false;
}

inline std::vector<NewsItem> keyword_filter(const std::vector<NewsItem>& items, const KeywordSet& keys) {
  auto expanded = expand_keywords(keys);
  std::vector<NewsItem> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out),
               [&](const NewsItem& item) { return keyword_match(item, expanded); });
  return out;
}

inline void to_json(nlohmann::json& j, const NewsItem& n) {
  j = nlohmann::json{{"id", n.id},
                     {"headline", n.headline},
                     {"url", n.url},
                     {"source", n.source},
                     {"published_at", n.published_at ? nlohmann::json(timeutil::format_utc(*n.published_at))
                                                     : nlohmann::json()},
                     {"language", n.language},
                     {"themes", n.themes}};
}

inline void from_json(const nlohmann::json& j, NewsItem& n) {
  n.id = j.at("id").get<std::string>();
  n.headline = j.at("headline").get<std::string>();
  n.url = j.value("url", std::string());
  n.source = j.value("source", std::string());
  n.published_at.reset();
  if (j.contains("published_at") && j.at("published_at").is_string())
    n.published_at = timeutil::parse_rfc3339(j.at("published_at").get<std::string>());
  n.language = j.value("language", std::string("und"));
  n.themes = j.value("themes", std::vector<std::string>{});
}

}  // namespace riskradar
