#include <random>

#include <gtest/gtest.h>

#include "riskradar/newsfeed.hpp"
#include "test_support.hpp"

namespace riskradar {
namespace {

std::string gkg_line(std::string_view date, std::string_view url, std::string_view source = "ex.com",
                     std::string_view themes = "ECON_TRADE;TAX_FNCACT_PRESIDENT,120", std::size_t fields = 27) {
  std::vector<std::string> f(fields);
  if (fields > 0) f[0] = "20191104123000-17";
  if (fields > 1) f[1] = std::string(date);
  if (fields > 2) f[2] = "1";
  if (fields > 3) f[3] = std::string(source);
  if (fields > 4) f[4] = std::string(url);
  if (fields > 7) f[7] = std::string(themes);
  if (fields > 15) f[15] = "-3.2,1.1,4.3,5.4,20.1,0,310";
  return text::join(f, "\t");
}

RiskDecomposition risk(std::size_t i) { return decompose_risk(testing::sample_risks()[i]); }

// ---------------------------------------------------------------- GKG

TEST(ParseGkgLine, WellFormedRecord) {
  auto r = parse_gkg_line(gkg_line("20191104123000", "https://ex.com/us-china-trade-war-escalates"));
  ASSERT_TRUE(std::holds_alternative<NewsItem>(r));
  const auto& item = std::get<NewsItem>(r);
  EXPECT_EQ(item.headline, "us china trade war escalates");
  ASSERT_TRUE(item.published_at);
  EXPECT_EQ(*item.published_at, 1572870600);
  EXPECT_EQ(timeutil::format_utc(*item.published_at), "2019-11-04T12:30:00Z");
  EXPECT_EQ(item.url, "https://ex.com/us-china-trade-war-escalates");
  EXPECT_EQ(item.source, "ex.com");
  EXPECT_EQ(item.language, "und");
  EXPECT_EQ(item.themes, (std::vector<std::string>{"ECON_TRADE", "TAX_FNCACT_PRESIDENT"}));
  EXPECT_EQ(item.id, "d0be991cb6dbecbd");
}

TEST(ParseGkgLine, WrongFieldCount) {
  auto r = parse_gkg_line(gkg_line("20191104123000", "https://ex.com/x", "ex.com", "", 26), {}, 7);
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
  EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::WrongFieldCount);
  EXPECT_EQ(std::get<ParseError>(r).line, 7u);
  EXPECT_TRUE(std::holds_alternative<ParseError>(parse_gkg_line(gkg_line("20191104123000", "u", "", "", 28))));
  EXPECT_TRUE(std::holds_alternative<ParseError>(parse_gkg_line("")));
}

TEST(ParseGkgLine, BadTimestamp) {
  for (auto date : {"2019", "20191304123000", "2019110412300x", "20190230000000", ""}) {
    auto r = parse_gkg_line(gkg_line(date, "https://ex.com/a"));
    ASSERT_TRUE(std::holds_alternative<ParseError>(r)) << date;
    EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::BadTimestamp) << date;
  }
}

TEST(ParseGkgLine, EmptyUrl) {
  auto r = parse_gkg_line(gkg_line("20191104123000", "  "));
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
  EXPECT_EQ(std::get<ParseError>(r).kind, ParseErrorKind::EmptyUrl);
}

TEST(ParseGkgLine, MissingSourceFallsBackToHostAndCrIsIgnored) {
  auto r = parse_gkg_line(gkg_line("20191104123000", "https://News.Example.com/a/b-c", "", "") + "\r");
  ASSERT_TRUE(std::holds_alternative<NewsItem>(r));
  EXPECT_EQ(std::get<NewsItem>(r).source, "news.example.com");
  EXPECT_TRUE(std::get<NewsItem>(r).themes.empty());
}

TEST(ParseGkgLine, CustomSchema) {
  GkgSchema schema;
  schema.field_count = 6;
  schema.index_of = {{GkgField::RecordId, 0}, {GkgField::Date, 1}, {GkgField::SourceName, 2},
                     {GkgField::DocumentUrl, 3}, {GkgField::Themes, 4}, {GkgField::Tone, 5}};
  schema.validate();
  auto r = parse_gkg_line("x\t20200101000000\tsrc\thttps://a.b/c-d\tT1\t0", schema);
  ASSERT_TRUE(std::holds_alternative<NewsItem>(r));
  EXPECT_EQ(std::get<NewsItem>(r).headline, "c d");

  schema.index_of[GkgField::Tone] = 6;
  EXPECT_THROW(schema.validate(), Error);
  schema.index_of[GkgField::Tone] = 0;
  EXPECT_THROW(schema.validate(), Error);
}

TEST(ParseGkg, ErrorAccountingAndLineNumbers) {
  std::string content = gkg_line("20191104123000", "https://ex.com/a") + "\n" + "short\tline\n" +
                        gkg_line("2019", "https://ex.com/b") + "\n\n" + gkg_line("20191104123000", "https://ex.com/c");
  auto res = parse_gkg(content);
  EXPECT_EQ(res.input_units, 5u);
  EXPECT_EQ(res.items.size(), 2u);
  ASSERT_EQ(res.errors.size(), 3u);
  EXPECT_EQ(res.errors[0].line, 2u);
  EXPECT_EQ(res.errors[1].kind, ParseErrorKind::BadTimestamp);
  EXPECT_EQ(res.errors[2].line, 4u);
  EXPECT_EQ(parse_gkg("").input_units, 0u);
}

TEST(ParseGkg, Deterministic) {
  auto content = testing::read_text(testing::fixture_dir() / "gkg_sample.csv");
  auto a = parse_gkg(content), b = parse_gkg(content);
  EXPECT_EQ(a.items, b.items);
  EXPECT_EQ(a.items.size(), 1000u);
  EXPECT_TRUE(a.errors.empty());
}

std::string mutate(std::string s, std::mt19937_64& rng) {
  static constexpr std::string_view alphabet = "\t\t\t;,%./-_ 0123456789abcXYZ\x80\xff\xc3\xa9\r";
  int edits = 1 + static_cast<int>(rng() % 6);
  for (int e = 0; e < edits; ++e) {
    std::size_t pos = s.empty() ? 0 : rng() % (s.size() + 1);
    switch (rng() % 4) {
      case 0:
        s.insert(pos, 1, alphabet[rng() % alphabet.size()]);
        break;
      case 1:
        if (pos < s.size()) s.erase(pos, 1 + rng() % 8);
        break;
      case 2:
        if (pos < s.size()) s[pos] = static_cast<char>(rng() & 0xFF);
        break;
      default:
        if (pos < s.size()) s[pos] = '\t';
    }
  }
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

TEST(ParseGkg, FuzzedLinesNeverThrowAndAreAccountedFor) {
  const auto sample = testing::read_text(testing::fixture_dir() / "gkg_sample.csv");
  auto seed_lines = text::split(sample, '\n');
  std::mt19937_64 rng(11);
  std::string corpus;
  const std::size_t n = 3000;
  for (std::size_t i = 0; i < n; ++i) {
    corpus += mutate(std::string(seed_lines[rng() % 1000]), rng);
    corpus += '\n';
  }
  NewsParseResult res;
  ASSERT_NO_THROW(res = parse_gkg(corpus));
  EXPECT_EQ(res.input_units, n);
  EXPECT_EQ(res.items.size() + res.errors.size(), n);
  for (const auto& item : res.items) EXPECT_FALSE(item.headline.empty()) << item.url;
}

// ---------------------------------------------------------------- feeds

TEST(ParseFeed, RssItemsInDocumentOrder) {
  auto res = parse_feed(testing::read_text(testing::fixture_dir() / "rss_sample.xml"));
  EXPECT_TRUE(res.errors.empty());
  EXPECT_EQ(res.input_units, 3u);
  ASSERT_EQ(res.items.size(), 3u);
  EXPECT_EQ(res.items[0].headline, "US-China trade war escalates as tariffs rise");
  EXPECT_EQ(res.items[0].url, "https://wire.example.com/markets/us-china-trade-war-escalates");
  EXPECT_EQ(res.items[0].source, "Desk Wire");
  EXPECT_EQ(res.items[0].language, "en-gb");
  EXPECT_EQ(res.items[0].published_at, std::optional<timeutil::Seconds>(1572870600));
  EXPECT_EQ(res.items[0].themes, std::vector<std::string>{"ECON_TRADE"});
  EXPECT_EQ(res.items[1].source, "Other Desk");
  EXPECT_EQ(res.items[1].published_at, std::optional<timeutil::Seconds>(1572855300));
  EXPECT_EQ(res.items[2].headline, "Regulator fines lender over employee misconduct");
  EXPECT_FALSE(res.items[2].published_at);
  EXPECT_EQ(res.items[0].id, news_id(res.items[0].url, res.items[0].headline));
}

TEST(ParseFeed, TitlelessItemIsSkippedWithError) {
  auto res = parse_feed(R"(<rss version="2.0"><channel><title>T</title>
    <item><title>one</title><link>https://a/1</link></item>
    <item><link>https://a/2</link></item>
    <item><title>three</title><link>https://a/3</link></item></channel></rss>)");
  ASSERT_EQ(res.items.size(), 2u);
  EXPECT_EQ(res.items[0].headline, "one");
  EXPECT_EQ(res.items[1].headline, "three");
  ASSERT_EQ(res.errors.size(), 1u);
  EXPECT_EQ(res.errors[0].kind, ParseErrorKind::MissingTitle);
  EXPECT_EQ(res.errors[0].line, 2u);
  EXPECT_EQ(res.input_units, 3u);
}

TEST(ParseFeed, EmptyChannel) {
  auto res = parse_feed("<rss version=\"2.0\"><channel></channel></rss>");
  EXPECT_TRUE(res.items.empty());
  EXPECT_TRUE(res.errors.empty());
  EXPECT_EQ(res.input_units, 0u);
}

TEST(ParseFeed, Atom) {
  auto res = parse_feed(testing::read_text(testing::fixture_dir() / "atom_sample.xml"));
  EXPECT_TRUE(res.errors.empty());
  ASSERT_EQ(res.items.size(), 2u);
  EXPECT_EQ(res.items[0].headline, "Technology infrastructure failure halts payments");
  EXPECT_EQ(res.items[0].url, "https://ops.example.com/2019/11/infrastructure-failure");
  EXPECT_EQ(res.items[0].source, "Ops Monitor");
  EXPECT_EQ(res.items[0].language, "en");
  EXPECT_EQ(res.items[0].themes, std::vector<std::string>{"TECH_OUTAGE"});
  EXPECT_EQ(res.items[0].published_at, std::optional<timeutil::Seconds>(1572940800));
  EXPECT_EQ(res.items[1].language, "fr");
  EXPECT_EQ(res.items[1].published_at, std::optional<timeutil::Seconds>(1572940800));
}

TEST(ParseFeed, MalformedDocumentIsOneFatalError) {
  for (std::string doc : {std::string("<rss><channel><item><title>x</title></channel>"), std::string("not xml at all"), std::string(),
                          std::string("<html><body/></html>"), std::string(1000, '<')}) {
    auto res = parse_feed(doc);
    EXPECT_TRUE(res.items.empty()) << doc;
    ASSERT_EQ(res.errors.size(), 1u) << doc;
    EXPECT_EQ(res.errors[0].kind, ParseErrorKind::MalformedDocument);
  }
}

TEST(ParseFeed, DeepNestingIsRejectedNotRecursed) {
  std::string doc;
  for (int i = 0; i < 100000; ++i) doc += "<a>";
  auto res = parse_feed(doc);
  ASSERT_EQ(res.errors.size(), 1u);
  EXPECT_EQ(res.errors[0].kind, ParseErrorKind::MalformedDocument);
}

TEST(ParseFeed, FuzzedDocumentsNeverThrow) {
  auto seed = testing::read_text(testing::fixture_dir() / "rss_sample.xml");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    std::string doc = seed;
    for (int e = 0; e < 1 + static_cast<int>(rng() % 10); ++e) {
      std::size_t pos = rng() % doc.size();
      if (rng() % 2)
        doc[pos] = "<>/&\"'x\x80"[rng() % 8];
      else
        doc.erase(pos, rng() % 20);
      if (doc.empty()) doc = "<";
    }
    NewsParseResult res;
    ASSERT_NO_THROW(res = parse_feed(doc));
    for (const auto& item : res.items) EXPECT_FALSE(item.headline.empty()) << item.url;
  }
}

// ---------------------------------------------------------------- headlines

TEST(HeadlineFromUrl, Examples) {
  EXPECT_EQ(headline_from_url("https://ex.com/news/cyber-attack-hits-bank-2019.html"), "cyber attack hits bank");
  EXPECT_EQ(headline_from_url("https://ex.com/"), "ex.com");
  EXPECT_EQ(headline_from_url("https://ex.com/a_b_c"), "a b c");
  EXPECT_EQ(headline_from_url("https://ex.com"), "ex.com");
  EXPECT_EQ(headline_from_url("https://ex.com/x/2019/"), "ex.com");
  EXPECT_EQ(headline_from_url("https://ex.com/Trade-War?id=3#top"), "trade war");
  EXPECT_EQ(headline_from_url("https://ex.com/caf%C3%A9-owners"), "caf\xc3\xa9 owners");
  EXPECT_EQ(headline_from_url("https://user@Ex.COM:8080/"), "ex.com");
}

TEST(HeadlineFromUrl, IdempotentOnItsOutputSpace) {
  static constexpr std::string_view alphabet = "abcdefXYZ0123456789-_.%~+ \xc3\xa9";
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string path;
    for (int seg = 0; seg < 1 + static_cast<int>(rng() % 3); ++seg) {
      path += '/';
      for (int c = 0; c < static_cast<int>(rng() % 16); ++c) path += alphabet[rng() % alphabet.size()];
    }
    std::string h = headline_from_url("https://ex.com" + path);
    ASSERT_FALSE(h.empty());
    if (h == "ex.com") continue;  // host fallback is outside the slug space
    std::string slug = h;
    std::replace(slug.begin(), slug.end(), ' ', '-');
    EXPECT_EQ(headline_from_url("https://ex.com/" + slug), h) << path;
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

// ---------------------------------------------------------------- keywords

TEST(BuildKeywords, SampleExamples) {
  EXPECT_EQ(build_keywords(risk(0)).keywords, (std::set<std::string>{"cyber-attacks"}));
  EXPECT_EQ(build_keywords(risk(1)).keywords, (std::set<std::string>{"us-china", "trade", "war", "escalation"}));
  EXPECT_EQ(build_keywords(risk(0)).risk_id, "R0001");
}

TEST(BuildKeywords, AllStopwordsIsAnError) {
  auto d = decompose_risk({"R9", "of the in", ""});
  try {
    build_keywords(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyKeywordSet);
  }
}

TEST(BuildKeywords, OptionalFieldsAndNoStopwords) {
  auto k = build_keywords(risk(3), default_stopwords(),
                          {KeywordField::Trigger, KeywordField::Outcome, KeywordField::Vessel});
  EXPECT_TRUE(k.keywords.count("reputational"));
  EXPECT_TRUE(k.keywords.count("monetary"));
  EXPECT_TRUE(k.keywords.count("banking"));
  EXPECT_FALSE(k.keywords.count("and"));
  for (const auto& w : k.keywords) {
    EXPECT_GE(w.size(), 3u);
    EXPECT_FALSE(default_stopwords().count(w));
  }
}

TEST(Stopwords, FixtureMatchesBuiltInList) {
  EXPECT_EQ(parse_stopwords(testing::read_text(testing::fixture_dir() / "stopwords.txt")), default_stopwords());
}

TEST(KeywordFilter, Examples) {
  auto keys = build_keywords(risk(1));
  auto trade = make_news_item("trade war fears grow", "https://a/1", "a", std::nullopt);
  auto wedding = make_news_item("celebrity wedding photos", "https://a/2", "a", std::nullopt);
  auto fused = make_news_item("US-China talks resume", "https://a/3", "a", std::nullopt);
  auto split = make_news_item("China responds", "https://a/4", "a", std::nullopt);
  auto themed = make_news_item("markets wobble", "https://a/5", "a", std::nullopt, "und", {"ECON_TRADE"});
  auto out = keyword_filter({trade, wedding, fused, split, themed}, keys);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0], trade);
  EXPECT_EQ(out[1], fused);
  EXPECT_EQ(out[2], split);
  EXPECT_EQ(out[3], themed);
  EXPECT_TRUE(keyword_filter({}, keys).empty());
  EXPECT_TRUE(keyword_filter({wedding}, keys).empty());
}

TEST(KeywordFilter, SubsetPreservingOrder) {
  auto keys = build_keywords(risk(1));
  static const std::vector<std::string> words{"trade", "war", "garden", "photos", "china", "escalation", "tea"};
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<NewsItem> items;
    for (int i = 0; i < 20; ++i) {
      std::string h = words[rng() % words.size()] + " " + words[rng() % words.size()];
      items.push_back(make_news_item(h, "https://x/" + std::to_string(i), "x", std::nullopt));
    }
    auto out = keyword_filter(items, keys);
    std::size_t j = 0;
    for (const auto& o : out) {
      while (j < items.size() && !(items[j] == o)) ++j;
      ASSERT_LT(j, items.size());
      ++j;
    }
  }
}

TEST(NewsItemJson, RoundTrip) {
  auto item = make_news_item("h", "https://a/b", "src", 1572870600, "en", {"T1", "T2"});
  nlohmann::json j = item;
  EXPECT_EQ(j.get<NewsItem>(), item);
  auto undated = make_news_item("h", "https://a/b", "src", std::nullopt);
  nlohmann::json k = undated;
  EXPECT_TRUE(k["published_at"].is_null());
  EXPECT_EQ(k.get<NewsItem>(), undated);
}

}  // namespace
}  // namespace riskradar
