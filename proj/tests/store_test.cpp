#include <cstdlib>

#include <gtest/gtest.h>

#include "riskradar/config.hpp"
#include "riskradar/store.hpp"
#include "test_support.hpp"

namespace riskradar {
namespace {

namespace fs = std::filesystem;

template <typename F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::vector<NewsItem> sample_news(std::size_t n, std::size_t offset = 0) {
  std::vector<NewsItem> out;
  for (std::size_t i = offset; i < offset + n; ++i)
    out.push_back(make_news_item("headline " + std::to_string(i), "https://s.example/" + std::to_string(i),
                                 "s.example", 1572566400 + static_cast<timeutil::Seconds>(i), "en", {"T_" + std::to_string(i)}));
  return out;
}

// ---------------------------------------------------------------- store

TEST(RecordStore, RoundTripAndDedup) {
  testing::TempDir dir;
  {
    auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
    auto first = store.append_risks(testing::sample_risks());
    EXPECT_EQ(first.added, 4u);
    EXPECT_EQ(first.duplicates, 0u);
    auto again = store.append_risks(testing::sample_risks());
    EXPECT_EQ(again.added, 0u);
    EXPECT_EQ(again.duplicates, 4u);
    EXPECT_EQ(store.append_news(sample_news(5)).added, 5u);
    auto mixed = store.append_news(sample_news(5, 3));
    EXPECT_EQ(mixed.added, 3u);
    EXPECT_EQ(mixed.duplicates, 2u);
    store.set_meta("k", "v");
  }
  auto store = RecordStore::open(dir.path(), StoreMode::ReadOnly);
  EXPECT_EQ(store.risks(), testing::sample_risks());
  auto news = store.news();
  ASSERT_EQ(news.size(), 8u);
  auto expected = sample_news(8);
  EXPECT_EQ(news, expected);
  EXPECT_EQ(store.meta("k"), std::optional<std::string>("v"));
  EXPECT_FALSE(store.interrupted_stage());
}

TEST(RecordStore, DuplicateWithinOneBatch) {
  testing::TempDir dir;
  auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
  auto news = sample_news(2);
  news.push_back(news[0]);
  auto r = store.append_news(news);
  EXPECT_EQ(r.added, 2u);
  EXPECT_EQ(r.duplicates, 1u);
}

TEST(RecordStore, ReadOnlyRefusesWrites) {
  testing::TempDir dir;
  { RecordStore::open(dir.path(), StoreMode::ReadWrite).append_risks(testing::sample_risks()); }
  auto store = RecordStore::open(dir.path(), StoreMode::ReadOnly);
  EXPECT_EQ(error_code_of([&] { store.append_risks(testing::sample_risks()); }), ErrorCode::Store);
  EXPECT_EQ(error_code_of([&] { store.write_artifact("graph.json", "x", "{}"); }), ErrorCode::Store);
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path() / "absent", StoreMode::ReadOnly); }), ErrorCode::Store);
}

TEST(RecordStore, WriterLockIsExclusive) {
  testing::TempDir dir;
  auto writer = RecordStore::open(dir.path(), StoreMode::ReadWrite);
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadWrite); }), ErrorCode::Store);
  EXPECT_NO_THROW(RecordStore::open(dir.path(), StoreMode::ReadOnly));
}

TEST(RecordStore, LockReleasedOnClose) {
  testing::TempDir dir;
  { auto w = RecordStore::open(dir.path(), StoreMode::ReadWrite); }
  EXPECT_NO_THROW(RecordStore::open(dir.path(), StoreMode::ReadWrite));
}

TEST(RecordStore, DetectsTampering) {
  testing::TempDir dir;
  {
    auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
    store.append_risks(testing::sample_risks());
    store.write_artifact(store_files::kGraphJson, "riskgraph/1", "{\"nodes\":[]}\n");
  }
  auto p = dir.path() / "graph.json";
  testing::write_text(p, "{\"nodes\":[1]}\n");
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadOnly); }), ErrorCode::Store);
  fs::remove(p);
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadOnly); }), ErrorCode::Store);
}

TEST(RecordStore, CorruptManifest) {
  testing::TempDir dir;
  { RecordStore::open(dir.path(), StoreMode::ReadWrite).append_risks(testing::sample_risks()); }
  testing::write_text(dir.path() / "MANIFEST.json", "{\"schema\":\"other/9\",\"files\":{}}");
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadOnly); }), ErrorCode::Store);
}

// A crash after appending bytes but before the manifest update leaves an
// uncommitted tail; reopening for write cuts it off.
TEST(RecordStore, RecoveryRepairsOnWriteOpen) {
  testing::TempDir dir;
  std::string committed;
  {
    auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
    store.append_news(sample_news(3));
    store.write_artifact(store_files::kMatches, "match/1", "old\n");
    committed = testing::read_text(dir.path() / "news.jsonl");
    store.begin_stage("news");
  }
  store_detail::append_bytes(dir.path() / "news.jsonl", nlohmann::json(sample_news(1, 10)[0]).dump() + "\n{\"trunc");
  testing::write_text(dir.path() / "matches.jsonl", "half-written\n");
  testing::write_text(dir.path() / "summary.json", "{}");
  testing::write_text(dir.path() / "graph.json.tmp", "partial");

  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadOnly); }), ErrorCode::Store);

  auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
  EXPECT_EQ(store.interrupted_stage(), std::optional<std::string>("news"));
  EXPECT_EQ(testing::read_text(dir.path() / "news.jsonl"), committed);
  EXPECT_EQ(store.news().size(), 3u);
  EXPECT_FALSE(fs::exists(dir.path() / "matches.jsonl"));
  EXPECT_FALSE(store.has_file(store_files::kMatches));
  EXPECT_FALSE(fs::exists(dir.path() / "summary.json"));
  EXPECT_FALSE(fs::exists(dir.path() / "graph.json.tmp"));
  store.append_news(sample_news(2, 3));
  store.finish_run();
  EXPECT_FALSE(fs::exists(dir.path() / "run.partial"));
  EXPECT_FALSE(store.interrupted_stage());
}

TEST(RecordStore, DamagedCommittedPrefixIsFatal) {
  testing::TempDir dir;
  {
    auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
    store.append_news(sample_news(3));
    store.begin_stage("news");
  }
  auto data = testing::read_text(dir.path() / "news.jsonl");
  data[5] = data[5] == 'x' ? 'y' : 'x';
  testing::write_text(dir.path() / "news.jsonl", data);
  EXPECT_EQ(error_code_of([&] { RecordStore::open(dir.path(), StoreMode::ReadWrite); }), ErrorCode::Store);
}

TEST(RecordStore, EmbeddingCacheKeyedByFingerprint) {
  testing::TempDir dir;
  auto news = sample_news(4);
  HashingEncoder enc;
  EmbeddingCache cache;
  for (const auto& n : news) cache.insert(n.id, embed(n.headline));
  {
    auto store = RecordStore::open(dir.path(), StoreMode::ReadWrite);
    store.save_embeddings(enc.fingerprint(), enc.dim(), news, cache);
  }
  auto store = RecordStore::open(dir.path(), StoreMode::ReadOnly);
  EmbeddingCache loaded;
  EXPECT_EQ(store.load_embeddings(enc.fingerprint(), news, loaded), 4u);
  for (const auto& n : news) EXPECT_EQ(loaded.find(n.id), cache.find(n.id));
  EmbeddingCache other;
  EXPECT_EQ(store.load_embeddings("hashing:something-else", news, other), 0u);
  EXPECT_EQ(other.size(), 0u);
}

// ---------------------------------------------------------------- config

TEST(KeyValues, Parsing) {
  auto kv = parse_key_values("# comment\n a = 1 \n\nb=two words\r\nc =\n", "t");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two words");
  EXPECT_EQ(kv.at("c"), "");
  EXPECT_EQ(error_code_of([] { parse_key_values("a=1\na=2\n", "t"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([] { parse_key_values("no equals sign\n", "t"); }), ErrorCode::Config);
}

TEST(LexiconConfig, FixtureMatchesDefaults) {
  auto lex = parse_lexicon(testing::read_text(testing::fixture_dir() / "lexicon.conf"));
  ExtractionLexicon defaults;
  EXPECT_EQ(lex.connectors, defaults.connectors);
  EXPECT_EQ(lex.causal_markers, defaults.causal_markers);
  EXPECT_EQ(lex.outcome_splitters, defaults.outcome_splitters);
  EXPECT_EQ(error_code_of([] { parse_lexicon("verbs = a\n"); }), ErrorCode::Config);
}

TEST(GkgSchemaConfig, FixtureMatchesDefaults) {
  auto schema = parse_gkg_schema(testing::read_text(testing::fixture_dir() / "gkg_schema.conf"));
  EXPECT_EQ(schema.field_count, GkgSchema{}.field_count);
  EXPECT_EQ(schema.index_of, GkgSchema{}.index_of);
  EXPECT_EQ(error_code_of([] { parse_gkg_schema("field_count = 3\ndocument_url = 5\n"); }), ErrorCode::Config);
}

class ConfigFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::create_directories(dir.path() / "conf");
    fs::copy_file(testing::fixture_dir() / "sample_risks.txt", dir.path() / "conf" / "risks.txt");
    testing::write_text(dir.path() / "conf" / "feed.csv", "");
  }
  PipelineConfig load(const std::string& body) {
    auto p = dir.path() / "conf" / "rr.conf";
    testing::write_text(p, body);
    return load_config(p);
  }
  testing::TempDir dir;
};

TEST_F(ConfigFiles, FixtureBundleLoads) {
  auto cfg = load_config(testing::fixture_dir() / "riskradar.conf");
  EXPECT_EQ(cfg.match.mode, QueryMode::FullText);
  EXPECT_DOUBLE_EQ(cfg.match.threshold, 0.35);
  EXPECT_EQ(cfg.match.top_k, 10u);
  EXPECT_TRUE(cfg.match.keyword_prefilter);
  ASSERT_EQ(cfg.sources.size(), 1u);
  EXPECT_EQ(cfg.sources.at("gdelt").kind, SourceKind::GdeltFile);
  EXPECT_EQ(fs::path(cfg.sources.at("gdelt").locator), (testing::fixture_dir() / "gkg_sample.zip").lexically_normal());
  EXPECT_EQ(cfg.encoder, EncoderConfig{});
  EXPECT_EQ(cfg.digest().size(), 16u);
}

TEST_F(ConfigFiles, RelativePathsResolveAgainstConfigDir) {
  auto cfg = load("store = ../store\nrisks = risks.txt\nsource.a.kind = local_fixture\nsource.a.locator = feed.csv\n"
                  "source.a.format = gkg\nsource.a.max_bytes = 1000\nsource.a.retries = 1\n");
  EXPECT_EQ(cfg.store_root, (dir.path() / "store").lexically_normal());
  EXPECT_EQ(*cfg.risks_file, (dir.path() / "conf" / "risks.txt").lexically_normal());
  auto& src = cfg.sources.at("a");
  EXPECT_EQ(src.name, "a");
  EXPECT_EQ(src.format, PayloadFormat::Gkg);
  EXPECT_EQ(src.max_bytes, 1000u);
  EXPECT_EQ(src.retries, 1);
}

TEST_F(ConfigFiles, Rejections) {
  EXPECT_EQ(error_code_of([&] { load("store = s\nstroe = t\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("risks = risks.txt\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nrisks = nope.txt\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nsource.a.locator = nope.csv\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nsource.a.colour = red\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nmatch.threshold = 1.5\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nmatch.top_k = 0\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nmatch.top_k = ten\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nencoder.dim = 4\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load("store = s\nprovider.kind = remote\n"); }), ErrorCode::Config);
  EXPECT_EQ(error_code_of([&] { load_config(dir.path() / "missing.conf"); }), ErrorCode::Config);
}

TEST_F(ConfigFiles, DigestTracksContentNotLayout) {
  auto a = load("store = s\nmatch.top_k = 5\n").digest();
  auto b = load("# reordered\nmatch.top_k   =   5\n\nstore=s\n").digest();
  auto c = load("store = s\nmatch.top_k = 6\n").digest();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST_F(ConfigFiles, RemoteProviderTokenFromEnvironment) {
  ::setenv("RISKRADAR_TEST_TOKEN", "tok", 1);
  auto cfg = load("store = s\nprovider.kind = remote\nprovider.endpoint = http://127.0.0.1:9/embed\n"
                  "provider.model = m\nprovider.dim = 8\nprovider.token_env = RISKRADAR_TEST_TOKEN\n");
  auto provider = cfg.make_provider();
  EXPECT_EQ(provider->dim(), 8u);
  EXPECT_EQ(provider->fingerprint(), "remote:http://127.0.0.1:9/embed;model=m;dim=8");
  ::unsetenv("RISKRADAR_TEST_TOKEN");
  auto hashing = load("store = s\nencoder.hash_seed = 3\n").make_provider();
  EXPECT_EQ(hashing->fingerprint(), HashingEncoder(EncoderConfig{.hash_seed = 3}).fingerprint());
}

}  // namespace
}  // namespace riskradar
