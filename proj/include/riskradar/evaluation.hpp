#pragma once
// Labeled synthetic news corpus and ranking-quality metrics.
//
// Per risk the generator emits headlines built from at least two of the
// risk's trigger content tokens plus neutral filler (relevant), and
// filler-only headlines (distractors). Filler vocabulary never intersects any
// risk sentence. Randomness comes from mt19937_64 raw output only, so the
// corpus is identical on every platform.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "riskradar/extraction.hpp"
#include "riskradar/matcher.hpp"
#include "riskradar/newsfeed.hpp"
#include "riskradar/timeutil.hpp"

namespace riskradar::eval {

struct CorpusSpec {
  std::size_t relevant_per_risk = 50;
  std::size_t distractors_per_risk = 150;
  std::size_t total = 1000;  // padded with extra distractors up to this size
  std::uint64_t seed = 7;
};

struct LabeledCorpus {
  std::vector<NewsItem> items;
  std::map<std::string, std::set<std::string>> relevant;  // risk id -> news ids
};

inline const std::vector<std::string>& filler_vocabulary() {
  static const std::vector<std::string> words{
      "garden",   "festival", "museum",   "harvest",  "orchestra", "recipe",   "mountain", "island",
      "painting", "library",  "marathon", "wedding",  "celebrity", "photos",   "bakery",   "sculpture",
      "poetry",   "weather",  "sunny",    "rainfall", "puppy",     "kitten",   "zoo",      "ballet",
      "cinema",   "premiere", "novel",    "author",   "chef",      "picnic",   "lighthouse", "canyon",
      "river",    "meadow",   "violin",   "piano",    "opera",     "comedy",   "theatre",  "gallery",
      "cathedral", "village", "parade",   "lantern",  "blossom",   "tulip",    "orchard",  "vineyard",
      "cheese",   "chocolate", "coffee",  "tea",      "soup",      "pastry",   "yoga",     "hiking",
      "camping",  "sailing",  "surfing",  "skiing",   "tennis",    "golf",     "chess",    "puzzle",
      "crossword", "knitting", "pottery", "quilt",    "birdwatching", "astronomy", "comet", "eclipse",
      "rainbow",  "snowfall", "glacier",  "volcano",  "dolphin",   "whale",    "penguin",  "panda",
      "giraffe",  "butterfly", "honey",   "beekeeping", "lavender", "sunflower", "pumpkin", "carnival",
      "circus",   "magician", "costume",  "fashion",  "jewelry",   "perfume",  "hairstyle", "makeover",
      "concert",  "album",    "singer",   "drummer",  "guitar",    "jazz",     "choir",    "dance",
      "holiday",  "vacation", "beach",    "resort",   "cruise",    "souvenir", "postcard", "stamp"};
  return words;
}

namespace detail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Lowercased word tokens and their hyphen parts.
inline std::set<std::string> sentence_words(std::string_view s) {
  std::set<std::string> out;
  for (const auto& w : text::word_tokens(s)) {
    out.insert(w);
    for (auto part : text::split(w, '-'))
      if (!part.empty()) out.emplace(part);
  }
  return out;
}

}  // namespace detail

// Content tokens of the trigger with hyphenated keywords split into parts.
inline std::vector<std::string> trigger_tokens(const RiskDecomposition& d) {
  std::set<std::string> out;
  for (const auto& k : expand_keywords(build_keywords(d)))
    if (k.find('-') == std::string::npos) out.insert(k);
  return {out.begin(), out.end()};
}

inline std::vector<std::string> neutral_vocabulary(const std::vector<RiskEntry>& risks) {
  std::set<std::string> banned;
  for (const auto& r : risks) {
    auto words = detail::sentence_words(r.record.raw_text);
    banned.insert(words.begin(), words.end());
  }
  std::vector<std::string> out;
  for (const auto& w : filler_vocabulary())
    if (!banned.count(w) && !default_stopwords().count(w)) out.push_back(w);
  return out;
}

inline LabeledCorpus generate_corpus(const std::vector<RiskEntry>& risks, const CorpusSpec& spec = {}) {
  std::mt19937_64 rng(spec.seed);
  const auto vocab = neutral_vocabulary(risks);
  if (vocab.size() < 8) throw Error(ErrorCode::InvalidInput, "neutral vocabulary too small");

  LabeledCorpus corpus;
  std::set<std::string> ids;
  const timeutil::Seconds base = *timeutil::from_civil(2019, 11, 1, 0, 0, 0);
  std::size_t serial = 0;

  auto fillers = [&](std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[detail::pick(rng, vocab.size())]);
    return out;
  };
  auto emit = [&](std::vector<std::string> words) -> std::string {
    for (;;) {
      ++serial;
      std::string headline = text::join(words, " ");
      std::string url = fmt::format("https://news{}.example.org/{:04d}/{}", serial % 7, serial, text::join(words, "-"));
      auto item = make_news_item(headline, url, fmt::format("news{}.example.org", serial % 7),
                                 base + static_cast<timeutil::Seconds>(serial) * 600);
      if (ids.insert(item.id).second) {
        corpus.items.push_back(std::move(item));
        return corpus.items.back().id;
      }
    }
  };

  for (const auto& risk : risks) {
    if (!risk.decomposition) throw Error(ErrorCode::InvalidInput, "risk '" + risk.record.id + "' is not decomposed");
    auto tokens = trigger_tokens(*risk.decomposition);
    if (tokens.size() < 2)
      throw Error(ErrorCode::InvalidInput, "risk '" + risk.record.id + "' has fewer than two trigger tokens");
    auto& relevant = corpus.relevant[risk.record.id];
    for (std::size_t i = 0; i < spec.relevant_per_risk; ++i) {
      // Random subset of size >= 2, kept in trigger order.
      std::vector<std::string> chosen;
      while (chosen.size() < 2) {
        chosen.clear();
        for (const auto& t : tokens)
          if (rng() & 1u) chosen.push_back(t);
      }
      auto words = fillers(1 + detail::pick(rng, 3));
      std::size_t at = detail::pick(rng, words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), chosen.begin(), chosen.end());
      relevant.insert(emit(std::move(words)));
    }
    for (std::size_t i = 0; i < spec.distractors_per_risk; ++i) emit(fillers(3 + detail::pick(rng, 3)));
  }
  while (corpus.items.size() < spec.total) emit(fillers(3 + detail::pick(rng, 3)));
  return corpus;
}

// One GKG 2.1 record per item; unmapped columns stay empty.
inline std::string render_gkg(const std::vector<NewsItem>& items, const GkgSchema& schema = {}) {
  std::string out;
  std::size_t n = 0;
  for (const auto& item : items) {
    std::vector<std::string> f(schema.field_count);
    std::string date = item.published_at ? timeutil::format_compact(*item.published_at) : std::string();
    f[schema.at(GkgField::RecordId)] = fmt::format("{}-{}", date, n++);
    f[schema.at(GkgField::Date)] = date;
    f[schema.at(GkgField::SourceName)] = item.source;
    f[schema.at(GkgField::DocumentUrl)] = item.url;
    f[schema.at(GkgField::Themes)] = text::join(item.themes, ";");
    f[schema.at(GkgField::Tone)] = "0,0,0,0,0,0,0";
    out += text::join(f, "\t");
    out += '\n';
  }
  return out;
}

inline double precision_at_k(const std::vector<MatchResult>& ranked, const std::set<std::string>& relevant,
                             std::size_t k) {
  if (k == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) hits += relevant.count(ranked[i].news_id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Fraction of (risk, item) pairs whose "score >= threshold" decision agrees
// with the label. Not comparable with accuracy figures on real data.
inline double accuracy_at_threshold(const std::map<std::string, std::map<std::string, double>>& scores,
                                    const LabeledCorpus& corpus, double threshold) {
  std::size_t correct = 0, total = 0;
  for (const auto& [risk_id, per_item] : scores) {
    auto rel = corpus.relevant.find(risk_id);
    for (const auto& [news_id, score] : per_item) {
      bool predicted = score >= threshold;
      bool actual = rel != corpus.relevant.end() && rel->second.count(news_id);
      correct += predicted == actual;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// Cosine of every corpus item against every risk query.
inline std::map<std::string, std::map<std::string, double>> score_matrix(const std::vector<RiskEntry>& risks,
                                                                         const std::vector<NewsItem>& items,
                                                                         EmbeddingProvider& provider,
                                                                         QueryMode mode) {
  std::vector<std::string> headlines;
  for (const auto& n : items) headlines.push_back(n.headline);
  auto news_vectors = provider.embed_batch(headlines);
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& r : risks) {
    std::vector<std::string> q{build_query(r, mode)};
    auto qv = provider.embed_batch(q);
    auto& row = out[r.record.id];
    for (std::size_t i = 0; i < items.size(); ++i) row[items[i].id] = cosine(qv[0], news_vectors[i]);
  }
  return out;
}

struct RiskEvaluation {
  std::string risk_id;
  double precision_at_k = 0.0;
};

struct Evaluation {
  std::size_t k = 10;
  std::vector<RiskEvaluation> per_risk;
  std::vector<std::pair<double, double>> accuracy_sweep;  // (threshold, accuracy)

  double mean_precision() const {
    if (per_risk.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : per_risk) s += r.precision_at_k;
    return s / static_cast<double>(per_risk.size());
  }
};

inline Evaluation evaluate(const std::vector<RiskEntry>& risks, const LabeledCorpus& corpus,
                           EmbeddingProvider& provider, MatchConfig config,
                           const std::vector<double>& sweep = {0.1, 0.2, 0.3, 0.35, 0.4, 0.5, 0.6}) {
  Evaluation ev;
  ev.k = config.top_k;
  config.threshold = -1.0;  // rank everything; the cut is the k in precision@k
  auto report = match_all(risks, corpus.items, provider, config);
  for (const auto& r : report.risks) {
    auto rel = corpus.relevant.find(r.risk_id);
    static const std::set<std::string> none;
    ev.per_risk.push_back({r.risk_id, precision_at_k(r.results, rel == corpus.relevant.end() ? none : rel->second,
                                                     config.top_k)});
  }
  auto scores = score_matrix(risks, corpus.items, provider, config.mode);
  for (double t : sweep) ev.accuracy_sweep.emplace_back(t, accuracy_at_threshold(scores, corpus, t));
  return ev;
}

}  // namespace riskradar::eval
