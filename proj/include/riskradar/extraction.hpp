#pragma once
// Risk sentence decomposition into trigger / exposure vessel / outcomes.
//
// The grammar is lexicon driven: the first causal marker splits the sentence
// into a cause part and an outcome part, and the first connector inside the
// cause part separates the trigger from the exposure vessel.

#include <algorithm>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskradar/error.hpp"
#include "riskradar/text.hpp"

namespace riskradar {

struct RiskRecord {
  std::string id;
  std::string raw_text;
  std::string source_tag;

  bool operator==(const RiskRecord&) const = default;
};

class CanonicalPhrase;
CanonicalPhrase normalize_phrase(std::string_view raw);

// A phrase that is its own fixed point under normalize_phrase.
class CanonicalPhrase {
 public:
  CanonicalPhrase() = default;

  const std::string& str() const noexcept { return text_; }
  bool empty() const noexcept { return text_.empty(); }

  auto operator<=>(const CanonicalPhrase&) const = default;

  // Accepts already-normalized text (e.g. read back from disk).
  static CanonicalPhrase from_normalized(std::string_view s);

 private:
  friend CanonicalPhrase normalize_phrase(std::string_view raw);
  explicit CanonicalPhrase(std::string s) : text_(std::move(s)) {}

  std::string text_;
};

enum class Confidence { Full, Partial, TriggerOnly };

constexpr std::string_view to_string(Confidence c) {
  switch (c) {
    case Confidence::Full: return "full";
    case Confidence::Partial: return "partial";
    case Confidence::TriggerOnly: return "trigger_only";
  }
  return "";
}

inline Confidence confidence_from_string(std::string_view s) {
  if (s == "full") return Confidence::Full;
  if (s == "partial") return Confidence::Partial;
  if (s == "trigger_only") return Confidence::TriggerOnly;
  throw Error(ErrorCode::InvalidInput, "unknown confidence '" + std::string(s) + "'");
}

// Raw (pre-normalization) text of each segment, kept for auditing.
struct RawSegments {
  std::string trigger;
  std::string vessel;
  std::string outcome;

  bool operator==(const RawSegments&) const = default;
};

struct RiskDecomposition {
  std::string risk_id;
  CanonicalPhrase trigger;
  std::vector<CanonicalPhrase> exposure_vessels;
  std::vector<CanonicalPhrase> outcomes;
  std::optional<std::string> connector;
  std::optional<std::string> causal_marker;
  Confidence confidence = Confidence::TriggerOnly;
  RawSegments segments;

  bool operator==(const RiskDecomposition&) const = default;
};

struct ExtractionLexicon {
  std::vector<std::string> connectors{"targeting", "affecting", "impacting",
                                      "disrupting", "hitting", "in"};
  std::vector<std::string> causal_markers{"causing", "resulting in", "leading to"};
  std::vector<std::string> outcome_splitters{"and/or", "or"};

  // Throws ErrorCode::Config when an entry is empty, not lowercase, or a
  // connector doubles as a causal marker.
  void validate() const {
    auto check = [](const std::vector<std::string>& list, std::string_view name) {
      for (const auto& entry : list) {
        if (text::trim(entry).empty())
          throw Error(ErrorCode::Config, "empty entry in lexicon list " + std::string(name));
        if (entry != text::to_lower(entry))
          throw Error(ErrorCode::Config, "lexicon entry '" + entry + "' is not lowercase");
      }
    };
    check(connectors, "connectors");
    check(causal_markers, "causal_markers");
    check(outcome_splitters, "outcome_splitters");
    for (const auto& c : connectors) {
      if (std::find(causal_markers.begin(), causal_markers.end(), c) != causal_markers.end())
        throw Error(ErrorCode::Config, "connector '" + c + "' is also a causal marker");
    }
  }
};

namespace detail {

inline bool is_article(std::string_view w) { return w == "the" || w == "a" || w == "an"; }

// One pass of every normalization rule over lowercased text.
inline std::string normalize_pass(std::string_view lowered) {
  auto words = text::split_whitespace(lowered);

  std::vector<std::string> fused;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "-" && !fused.empty() && i + 1 < words.size()) {
      fused.back() += '-';
      fused.back() += words[i + 1];
      ++i;
    } else {
      fused.emplace_back(words[i]);
    }
  }

  std::string joined = text::join(fused, " ");
  std::string stripped(text::strip_punct(joined));

  auto rest = text::split_whitespace(stripped);
  std::size_t first = 0;
  while (first < rest.size() && is_article(rest[first])) ++first;
  return text::join(std::vector<std::string_view>(rest.begin() + static_cast<std::ptrdiff_t>(first), rest.end()),
                    " ");
}

// Key used to compare a sentence token against lexicon entries.
inline std::string token_key(std::string_view token) {
  return text::to_lower(text::strip_punct(token));
}

inline std::vector<std::vector<std::string>> split_phrases(const std::vector<std::string>& phrases) {
  std::vector<std::vector<std::string>> out;
  out.reserve(phrases.size());
  for (const auto& p : phrases) {
    std::vector<std::string> toks;
    for (auto t : text::split_whitespace(p)) toks.emplace_back(t);
    out.push_back(std::move(toks));
  }
  return out;
}

// Index into `phrases` of the longest phrase matching keys at position i.
inline std::optional<std::size_t> longest_match_at(const std::vector<std::string>& keys, std::size_t i,
                                                   const std::vector<std::vector<std::string>>& phrases) {
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (std::size_t p = 0; p < phrases.size(); ++p) {
    const auto& toks = phrases[p];
    if (toks.empty() || i + toks.size() > keys.size() || toks.size() <= best_len) continue;
    if (std::equal(toks.begin(), toks.end(), keys.begin() + static_cast<std::ptrdiff_t>(i))) {
      best = p;
      best_len = toks.size();
    }
  }
  return best;
}

inline std::string join_range(const std::vector<std::string_view>& tokens, std::size_t from, std::size_t to) {
  return text::join(std::vector<std::string_view>(tokens.begin() + static_cast<std::ptrdiff_t>(from),
                                                  tokens.begin() + static_cast<std::ptrdiff_t>(to)),
                    " ");
}

}  // namespace detail

// Lowercase, collapse whitespace, fuse "<w> - <w>", strip surrounding
// punctuation and leading articles. Applied until a fixed point is reached,
// which makes the result idempotent by construction.
inline CanonicalPhrase normalize_phrase(std::string_view raw) {
  std::string current = text::to_lower(raw);
  while (true) {
    std::string next = detail::normalize_pass(current);
    if (next == current) break;
    current = std::move(next);
  }
  return CanonicalPhrase(std::move(current));
}

inline CanonicalPhrase CanonicalPhrase::from_normalized(std::string_view s) {
  CanonicalPhrase p = normalize_phrase(s);
  if (p.str() != s)
    throw Error(ErrorCode::InvalidInput, "phrase '" + std::string(s) + "' is not in canonical form");
  return p;
}

inline std::vector<CanonicalPhrase> split_outcomes(std::string_view segment,
                                                   const ExtractionLexicon& lexicon = {}) {
  auto tokens = text::split_whitespace(segment);
  std::vector<std::string> keys;
  keys.reserve(tokens.size());
  for (auto t : tokens) keys.push_back(detail::token_key(t));
  auto splitters = detail::split_phrases(lexicon.outcome_splitters);

  std::vector<CanonicalPhrase> out;
  std::size_t piece_start = 0;
  auto flush = [&](std::size_t end) {
    auto phrase = normalize_phrase(detail::join_range(tokens, piece_start, end));
    if (!phrase.empty()) out.push_back(std::move(phrase));
  };
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (auto m = detail::longest_match_at(keys, i, splitters)) {
      flush(i);
      i += splitters[*m].size();
      piece_start = i;
    } else {
      ++i;
    }
  }
  flush(tokens.size());
  return out;
}

inline RiskDecomposition decompose_risk(const RiskRecord& record, const ExtractionLexicon& lexicon = {}) {
  if (text::trim(record.raw_text).empty())
    throw Error(ErrorCode::InvalidInput, "risk '" + record.id + "' has empty text");

  auto tokens = text::split_whitespace(record.raw_text);
  std::vector<std::string> keys;
  keys.reserve(tokens.size());
  for (auto t : tokens) keys.push_back(detail::token_key(t));

  RiskDecomposition d;
  d.risk_id = record.id;

  auto markers = detail::split_phrases(lexicon.causal_markers);
  std::optional<std::size_t> marker_pos;
  std::size_t marker_len = 0;
  for (std::size_t i = 0; i < keys.size() && !marker_pos; ++i) {
    if (auto m = detail::longest_match_at(keys, i, markers)) {
      marker_pos = i;
      marker_len = markers[*m].size();
      d.causal_marker = lexicon.causal_markers[*m];
    }
  }

  if (!marker_pos) {
    d.segments.trigger = detail::join_range(tokens, 0, tokens.size());
    d.trigger = normalize_phrase(d.segments.trigger);
    d.confidence = Confidence::TriggerOnly;
  } else {
    std::size_t cause_end = *marker_pos;
    std::optional<std::size_t> connector_pos;
    for (std::size_t i = 0; i < cause_end && !connector_pos; ++i) {
      auto it = std::find(lexicon.connectors.begin(), lexicon.connectors.end(), keys[i]);
      if (it != lexicon.connectors.end()) {
        connector_pos = i;
        d.connector = *it;
      }
    }
    if (connector_pos) {
      d.segments.trigger = detail::join_range(tokens, 0, *connector_pos);
      d.segments.vessel = detail::join_range(tokens, *connector_pos + 1, cause_end);
    } else {
      d.segments.trigger = detail::join_range(tokens, 0, cause_end);
    }
    d.segments.outcome = detail::join_range(tokens, cause_end + marker_len, tokens.size());

    d.trigger = normalize_phrase(d.segments.trigger);
    if (auto vessel = normalize_phrase(d.segments.vessel); !vessel.empty())
      d.exposure_vessels.push_back(std::move(vessel));
    d.outcomes = split_outcomes(d.segments.outcome, lexicon);
    d.confidence = (!d.exposure_vessels.empty() && !d.outcomes.empty()) ? Confidence::Full
                                                                         : Confidence::Partial;
  }

  if (d.trigger.empty())
    throw Error(ErrorCode::ExtractionFailed, "risk '" + record.id + "' has no trigger text");
  return d;
}

// Pluggable decomposition strategy; a learned sequence model can implement
// this in place of the grammar.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual RiskDecomposition decompose(const RiskRecord& record) const = 0;
};

class GrammarExtractor final : public Extractor {
 public:
  explicit GrammarExtractor(ExtractionLexicon lexicon = {}) : lexicon_(std::move(lexicon)) {
    lexicon_.validate();
  }

  RiskDecomposition decompose(const RiskRecord& record) const override {
    return decompose_risk(record, lexicon_);
  }

  const ExtractionLexicon& lexicon() const noexcept { return lexicon_; }

 private:
  ExtractionLexicon lexicon_;
};

// Risk repository input: either one sentence per line (ids R0001, R0002, ...
// by position among non-blank lines) or JSON lines with id/raw_text/source_tag.
inline std::vector<RiskRecord> parse_risk_repository(std::string_view content,
                                                     std::string_view default_source_tag) {
  auto lines = text::split(content, '\n');
  bool json_lines = false;
  for (auto line : lines) {
    auto t = text::trim(line);
    if (t.empty()) continue;
    json_lines = t.front() == '{';
    break;
  }

  std::vector<RiskRecord> out;
  std::size_t line_no = 0;
  for (auto line : lines) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty()) continue;
    RiskRecord r;
    if (json_lines) {
      nlohmann::json j = nlohmann::json::parse(t, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("raw_text") ||
          !j["id"].is_string() || !j["raw_text"].is_string())
        throw Error(ErrorCode::InvalidInput, fmt::format("risk record on line {} is malformed", line_no));
      r.id = j["id"].get<std::string>();
      r.raw_text = std::string(text::trim(j["raw_text"].get<std::string>()));
      r.source_tag = j.value("source_tag", std::string(default_source_tag));
      if (r.id.empty() || r.raw_text.empty())
        throw Error(ErrorCode::InvalidInput, fmt::format("risk record on line {} is empty", line_no));
    } else {
      r.id = fmt::format("R{:04d}", out.size() + 1);
      r.raw_text = std::string(t);
      r.source_tag = std::string(default_source_tag);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void to_json(nlohmann::json& j, const RiskRecord& r) {
  j = nlohmann::json{{"id", r.id}, {"raw_text", r.raw_text}, {"source_tag", r.source_tag}};
}

inline void from_json(const nlohmann::json& j, RiskRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.source_tag = j.value("source_tag", std::string());
}

inline void to_json(nlohmann::json& j, const RiskDecomposition& d) {
  auto phrases = [](const std::vector<CanonicalPhrase>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : v) arr.push_back(p.str());
    return arr;
  };
  j = nlohmann::json{{"risk_id", d.risk_id},
                     {"trigger", d.trigger.str()},
                     {"exposure_vessels", phrases(d.exposure_vessels)},
                     {"outcomes", phrases(d.outcomes)},
                     {"connector", d.connector ? nlohmann::json(*d.connector) : nlohmann::json()},
                     {"causal_marker", d.causal_marker ? nlohmann::json(*d.causal_marker) : nlohmann::json()},
                     {"confidence", std::string(to_string(d.confidence))},
                     {"segments",
                      {{"trigger", d.segments.trigger},
                       {"vessel", d.segments.vessel},
                       {"outcome", d.segments.outcome}}}};
}

inline void from_json(const nlohmann::json& j, RiskDecomposition& d) {
  auto phrases = [](const nlohmann::json& arr) {
    std::vector<CanonicalPhrase> v;
    for (const auto& p : arr) v.push_back(CanonicalPhrase::from_normalized(p.get<std::string>()));
    return v;
  };
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
  };
  d.risk_id = j.at("risk_id").get<std::string>();
  d.trigger = CanonicalPhrase::from_normalized(j.at("trigger").get<std::string>());
  d.exposure_vessels = phrases(j.at("exposure_vessels"));
  d.outcomes = phrases(j.at("outcomes"));
  d.connector = optional_string("connector");
  d.causal_marker = optional_string("causal_marker");
  d.confidence = confidence_from_string(j.at("confidence").get<std::string>());
  if (j.contains("segments")) {
    const auto& s = j.at("segments");
    d.segments.trigger = s.value("trigger", std::string());
    d.segments.vessel = s.value("vessel", std::string());
    d.segments.outcome = s.value("outcome", std::string());
  }
}

}  // namespace riskradar
