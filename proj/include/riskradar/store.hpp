#pragma once
// Plain-file record store.
//
// Layout under the store root:
//   MANIFEST.json         schema versions, byte sizes and FNV-1a digests
//   risks.jsonl           append-only RiskRecord lines
//   news.jsonl            append-only NewsItem lines
//   decompositions.jsonl  per-run snapshot (atomically replaced)
//   matches.jsonl         per-run report rows (atomically replaced)
//   graph.json graph.dot  per-run exports
//   embeddings.rrv        RRV1 news-vector cache
//   summary.json          last RunSummary
//   run.partial           present while a run is in flight
//   .lock                 advisory lock held by the single writer
//
// Every mutation first writes run.partial, then the data, then the manifest
// (tmp + rename). A writer opening a store with run.partial present truncates
// append-only files back to their manifest size and drops derived files whose
// digest no longer matches, so the interrupted stage is simply redone.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "riskradar/embedding.hpp"
#include "riskradar/error.hpp"
#include "riskradar/extraction.hpp"
#include "riskradar/matcher.hpp"
#include "riskradar/newsfeed.hpp"
#include "riskradar/text.hpp"

namespace riskradar {

namespace store_files {
inline constexpr std::string_view kManifest = "MANIFEST.json";
inline constexpr std::string_view kRisks = "risks.jsonl";
inline constexpr std::string_view kNews = "news.jsonl";
inline constexpr std::string_view kDecompositions = "decompositions.jsonl";
inline constexpr std::string_view kMatches = "matches.jsonl";
inline constexpr std::string_view kGraphJson = "graph.json";
inline constexpr std::string_view kGraphDot = "graph.dot";
inline constexpr std::string_view kEmbeddings = "embeddings.rrv";
inline constexpr std::string_view kSummary = "summary.json";
inline constexpr std::string_view kPartial = "run.partial";
inline constexpr std::string_view kLock = ".lock";
}  // namespace store_files

namespace store_detail {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void fsync_path(const fs::path& p) {
  int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

inline void atomic_write(const fs::path& p, std::string_view data) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "short write on " + tmp.string());
  }
  fsync_path(tmp);
  fs::rename(tmp, p);
}

inline void append_bytes(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "short append on " + p.string());
  out.close();
  fsync_path(p);
}

}  // namespace store_detail

struct FileEntry {
  std::string schema;
  std::uint64_t size = 0;
  std::uint64_t digest = text::kFnvOffsetBasis;
};

struct AppendResult {
  std::size_t added = 0;
  std::size_t duplicates = 0;
};

enum class StoreMode { ReadOnly, ReadWrite };

class RecordStore {
 public:
  static constexpr std::string_view kSchema = "riskradar-store/1";

  // ReadWrite creates the root if needed, takes the writer lock and repairs an
  // interrupted run. ReadOnly never modifies anything.
  static RecordStore open(const std::filesystem::path& root, StoreMode mode) {
    RecordStore s(root, mode);
    s.open_impl();
    return s;
  }

  RecordStore(RecordStore&& o) noexcept
      : root_(std::move(o.root_)),
        mode_(o.mode_),
        lock_fd_(std::exchange(o.lock_fd_, -1)),
        files_(std::move(o.files_)),
        meta_(std::move(o.meta_)),
        interrupted_stage_(std::move(o.interrupted_stage_)) {}
  RecordStore& operator=(RecordStore&&) = delete;
  RecordStore(const RecordStore&) = delete;

  ~RecordStore() {
    if (lock_fd_ >= 0) {
      ::flock(lock_fd_, LOCK_UN);
      ::close(lock_fd_);
    }
  }

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path(std::string_view name) const { return root_ / std::string(name); }

  // Stage name recorded by a run that did not finish, if any.
  const std::optional<std::string>& interrupted_stage() const noexcept { return interrupted_stage_; }
  bool has_file(std::string_view name) const { return files_.count(std::string(name)) != 0; }

  // ---------------------------------------------------------------- reads

  std::vector<RiskRecord> risks() const { return read_unique<RiskRecord>(store_files::kRisks); }
  std::vector<NewsItem> news() const { return read_unique<NewsItem>(store_files::kNews); }

  std::vector<RiskDecomposition> decompositions() const {
    std::vector<RiskDecomposition> out;
    for (const auto& j : read_lines(store_files::kDecompositions)) out.push_back(j.get<RiskDecomposition>());
    return out;
  }

  std::vector<MatchRow> match_rows() const {
    std::vector<MatchRow> out;
    for (const auto& j : read_lines(store_files::kMatches)) out.push_back(row_from_json(j));
    return out;
  }

  std::optional<std::string> read_artifact(std::string_view name) const {
    if (!has_file(name)) return std::nullopt;
    return store_detail::slurp(path(name));
  }

  std::optional<std::string> meta(const std::string& key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) return std::nullopt;
    return it->second;
  }

  // ---------------------------------------------------------------- writes

  void begin_stage(std::string_view stage) {
    require_writer();
    store_detail::atomic_write(path(store_files::kPartial), std::string(stage) + "\n");
  }

  void finish_run() {
    require_writer();
    std::filesystem::remove(path(store_files::kPartial));
    interrupted_stage_.reset();
  }

  AppendResult append_risks(const std::vector<RiskRecord>& records) {
    return append_unique(store_files::kRisks, "risk/1", records, risks());
  }

  AppendResult append_news(const std::vector<NewsItem>& items) {
    return append_unique(store_files::kNews, "news/1", items, news());
  }

  void write_artifact(std::string_view name, std::string_view schema, std::string_view content) {
    require_writer();
    store_detail::atomic_write(path(name), content);
    files_[std::string(name)] = FileEntry{std::string(schema), content.size(), text::fnv1a64(content)};
    write_manifest();
  }

  void set_meta(const std::string& key, const std::string& value) {
    require_writer();
    meta_[key] = value;
    write_manifest();
  }

  // ---------------------------------------------------------------- embeddings

  // Cached news vectors for `items`, valid only for the same provider fingerprint.
  std::size_t load_embeddings(const std::string& fingerprint, const std::vector<NewsItem>& items,
                              EmbeddingCache& cache) const {
    if (meta("embedding_fingerprint") != fingerprint) return 0;
    auto data = read_artifact(store_files::kEmbeddings);
    if (!data) return 0;
    auto file = decode_vector_cache(*data);
    std::map<std::uint64_t, const EmbeddingVector*> by_hash;
    for (const auto& r : file.records) by_hash.emplace(r.id_hash, &r.vector);
    std::size_t loaded = 0;
    for (const auto& item : items) {
      auto it = by_hash.find(text::fnv1a64(item.id));
      if (it != by_hash.end() && cache.insert(item.id, *it->second)) ++loaded;
    }
    return loaded;
  }

  void save_embeddings(const std::string& fingerprint, std::size_t dim, const std::vector<NewsItem>& items,
                       const EmbeddingCache& cache) {
    std::vector<CachedVector> records;
    std::set<std::string> seen;
    for (const auto& item : items) {
      if (!seen.insert(item.id).second) continue;
      if (auto v = cache.find(item.id)) records.push_back({text::fnv1a64(item.id), std::move(*v)});
    }
    meta_["embedding_fingerprint"] = fingerprint;
    write_artifact(store_files::kEmbeddings, "rrv/1", encode_vector_cache(dim, records));
  }

 private:
  RecordStore(std::filesystem::path root, StoreMode mode) : root_(std::move(root)), mode_(mode) {}

  void require_writer() const {
    if (mode_ != StoreMode::ReadWrite) throw Error(ErrorCode::Store, "store opened read-only");
  }

  void open_impl() {
    namespace fs = std::filesystem;
    if (mode_ == StoreMode::ReadWrite) {
      std::error_code ec;
      fs::create_directories(root_, ec);
      if (ec) throw Error(ErrorCode::Store, "cannot create store root " + root_.string() + ": " + ec.message());
      lock_fd_ = ::open(path(store_files::kLock).c_str(), O_RDWR | O_CREAT, 0644);
      if (lock_fd_ < 0) throw Error(ErrorCode::Store, "store root is not writable: " + root_.string());
      if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw Error(ErrorCode::Store, "another process holds the store lock at " + root_.string());
      }
    } else if (!fs::is_directory(root_)) {
      throw Error(ErrorCode::Store, "store does not exist: " + root_.string());
    }

    read_manifest();
    if (fs::exists(path(store_files::kPartial))) {
      auto stage = std::string(text::trim(store_detail::slurp(path(store_files::kPartial))));
      interrupted_stage_ = stage.empty() ? std::string("unknown") : stage;
      spdlog::warn("store {} has an interrupted run (stage '{}')", root_.string(), *interrupted_stage_);
      if (mode_ == StoreMode::ReadWrite) recover();
    }
    verify();
  }

  void read_manifest() {
    auto p = path(store_files::kManifest);
    if (!std::filesystem::exists(p)) return;
    auto doc = nlohmann::json::parse(store_detail::slurp(p), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || doc.value("schema", "") != kSchema)
      throw Error(ErrorCode::Store, "manifest is unreadable or has an unknown schema: " + p.string());
    for (const auto& [name, f] : doc.at("files").items()) {
      FileEntry e;
      e.schema = f.at("schema").get<std::string>();
      e.size = f.at("size").get<std::uint64_t>();
      auto digest = f.at("digest").get<std::string>();
      auto [ptr, ec] = std::from_chars(digest.data(), digest.data() + digest.size(), e.digest, 16);
      if (ec != std::errc() || ptr != digest.data() + digest.size())
        throw Error(ErrorCode::Store, "manifest digest for " + name + " is not hex");
      files_[name] = e;
    }
    if (doc.contains("meta"))
      for (const auto& [k, v] : doc.at("meta").items()) meta_[k] = v.get<std::string>();
  }

  void write_manifest() {
    nlohmann::ordered_json doc;
    doc["schema"] = kSchema;
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [name, e] : files_)
      files[name] = {{"schema", e.schema}, {"size", e.size}, {"digest", text::hex64(e.digest)}};
    doc["files"] = files;
    doc["meta"] = meta_;
    store_detail::atomic_write(path(store_files::kManifest), doc.dump(2) + "\n");
  }

  static bool append_only(std::string_view name) {
    return name == store_files::kRisks || name == store_files::kNews;
  }

  void recover() {
    namespace fs = std::filesystem;
    static constexpr std::string_view kKnown[] = {
        store_files::kRisks,     store_files::kNews,     store_files::kDecompositions, store_files::kMatches,
        store_files::kGraphJson, store_files::kGraphDot, store_files::kEmbeddings,     store_files::kSummary};
    bool manifest_changed = false;
    for (auto name : kKnown) {
      auto p = path(name);
      auto it = files_.find(std::string(name));
      if (!fs::exists(p)) {
        if (it != files_.end()) {
          files_.erase(it);
          manifest_changed = true;
        }
        continue;
      }
      if (it == files_.end()) {
        spdlog::warn("recovery: removing uncommitted {}", name);
        fs::remove(p);
        continue;
      }
      auto data = store_detail::slurp(p);
      if (data.size() == it->second.size && text::fnv1a64(data) == it->second.digest) continue;
      if (append_only(name) && data.size() > it->second.size &&
          text::fnv1a64(std::string_view(data).substr(0, it->second.size)) == it->second.digest) {
        spdlog::warn("recovery: truncating {} to {} committed bytes", name, it->second.size);
        fs::resize_file(p, it->second.size);
        continue;
      }
      if (append_only(name)) throw Error(ErrorCode::Store, fmt::format("{} does not match its manifest entry", name));
      spdlog::warn("recovery: dropping {} (does not match manifest)", name);
      fs::remove(p);
      files_.erase(it);
      manifest_changed = true;
    }
    for (auto& entry : fs::directory_iterator(root_))
      if (entry.path().extension() == ".tmp") fs::remove(entry.path());
    if (manifest_changed) write_manifest();
  }

  void verify() const {
    for (const auto& [name, e] : files_) {
      auto p = path(name);
      if (!std::filesystem::exists(p)) throw Error(ErrorCode::Store, "manifest lists missing file " + name);
      auto data = store_detail::slurp(p);
      if (data.size() != e.size || text::fnv1a64(data) != e.digest)
        throw Error(ErrorCode::Store, "digest mismatch for " + name + (interrupted_stage_ ? " (interrupted run; reopen for writing to repair)" : ""));
    }
  }

  std::vector<nlohmann::json> read_lines(std::string_view name) const {
    std::vector<nlohmann::json> out;
    auto data = read_artifact(name);
    if (!data) return out;
    std::size_t line_no = 0;
    for (auto line : text::split(*data, '\n')) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::Store, fmt::format("{}:{} is not valid JSON", name, line_no));
      out.push_back(std::move(j));
    }
    return out;
  }

  template <typename T>
  std::vector<T> read_unique(std::string_view name) const {
    std::vector<T> out;
    std::set<std::string> ids;
    for (const auto& j : read_lines(name)) {
      T v = j.get<T>();
      if (!ids.insert(v.id).second) {
        spdlog::warn("{}: ignoring later duplicate id '{}'", name, v.id);
        continue;
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  template <typename T>
  AppendResult append_unique(std::string_view name, std::string_view schema, const std::vector<T>& incoming,
                             const std::vector<T>& existing) {
    require_writer();
    std::set<std::string> ids;
    for (const auto& e : existing) ids.insert(e.id);
    AppendResult result;
    std::string block;
    for (const auto& v : incoming) {
      if (!ids.insert(v.id).second) {
        ++result.duplicates;
        spdlog::warn("{}: skipping duplicate id '{}'", name, v.id);
        continue;
      }
      block += nlohmann::json(v).dump() + "\n";
      ++result.added;
    }
    if (block.empty() && has_file(name)) return result;
    store_detail::append_bytes(path(name), block);
    auto& e = files_[std::string(name)];
    e.schema = std::string(schema);
    e.digest = text::fnv1a64(block, e.digest);
    e.size += block.size();
    write_manifest();
    return result;
  }

  std::filesystem::path root_;
  StoreMode mode_;
  int lock_fd_ = -1;
  std::map<std::string, FileEntry> files_;
  std::map<std::string, std::string> meta_;
  std::optional<std::string> interrupted_stage_;
};

}  // namespace riskradar
