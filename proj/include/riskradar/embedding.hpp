#pragma once
// Deterministic signed feature-hashing sentence encoder and cosine scoring.
//
// Features are word tokens ("w:") and code-point trigrams ("c:") of the
// lowercased text. Each feature is hashed with seeded FNV-1a-64 into a slot
// and a sign; weights accumulate in feature first-appearance order in double
// precision, then the vector is L2-normalized and stored as float32.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "riskradar/error.hpp"
#include "riskradar/text.hpp"

namespace riskradar {

enum class TfWeighting { Raw, Sublinear };

struct EncoderConfig {
  std::size_t dim = 384;
  bool use_word_tokens = true;
  bool use_char_trigrams = true;
  TfWeighting tf_weighting = TfWeighting::Sublinear;
  std::uint64_t hash_seed = 0;

  void validate() const {
    if (dim < 8) throw Error(ErrorCode::Config, "encoder dim must be at least 8");
    if (!use_word_tokens && !use_char_trigrams)
      throw Error(ErrorCode::Config, "encoder needs at least one feature family");
  }

  std::string canonical() const {
    return fmt::format("dim={};words={};trigrams={};tf={};seed={}", dim, use_word_tokens, use_char_trigrams,
                       tf_weighting == TfWeighting::Raw ? "raw" : "sublinear", hash_seed);
  }

  bool operator==(const EncoderConfig&) const = default;
};

struct EmbeddingVector {
  std::vector<float> values;
  bool zero = false;  // sentinel for texts with no features

  std::size_t dim() const noexcept { return values.size(); }

  static EmbeddingVector zeros(std::size_t dim) { return {std::vector<float>(dim, 0.0f), true}; }

  bool operator==(const EmbeddingVector&) const = default;
};

inline double l2_norm(const EmbeddingVector& v) {
  double sum = 0.0;
  for (float x : v.values) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

namespace detail {

inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

inline std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t n = utf8_length(static_cast<unsigned char>(s[i]));
    if (i + n > s.size()) n = 1;
    for (std::size_t k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        n = 1;
        break;
      }
    }
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view input, const EncoderConfig& config = {}) {
  std::vector<std::string> features;
  if (config.use_word_tokens) {
    for (auto& w : text::word_tokens(input)) features.push_back("w:" + w);
  }
  if (config.use_char_trigrams) {
    std::string collapsed = text::join(text::split_whitespace(text::to_lower(input)), " ");
    auto cps = detail::code_points(collapsed);
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      std::string f = "c:";
      f.append(cps[i]).append(cps[i + 1]).append(cps[i + 2]);
      features.push_back(std::move(f));
    }
  }
  return features;
}

// FNV-1a-64 over the 8 little-endian seed bytes followed by the feature bytes.
inline std::uint64_t seeded_fnv1a64(std::string_view feature, std::uint64_t seed) {
  std::uint64_t h = text::kFnvOffsetBasis;
  for (int b = 0; b < 8; ++b) {
    h ^= (seed >> (8 * b)) & 0xFFu;
    h *= text::kFnvPrime;
  }
  return text::fnv1a64(feature, h);
}

struct FeatureSlot {
  std::size_t index;
  int sign;  // +1 or -1

  bool operator==(const FeatureSlot&) const = default;
};

inline FeatureSlot hash_feature(std::string_view feature, std::uint64_t seed, std::size_t dim) {
  std::uint64_t h = seeded_fnv1a64(feature, seed);
  return {static_cast<std::size_t>(h % dim), (h >> 63) == 0 ? 1 : -1};
}

namespace detail {

// Slot accumulation for an explicit feature order; used by embed() with the
// canonical first-appearance order.
inline EmbeddingVector accumulate(const std::vector<std::pair<std::string, std::size_t>>& counted,
                                  const EncoderConfig& config) {
  std::vector<double> slots(config.dim, 0.0);
  for (const auto& [feature, tf] : counted) {
    double weight = config.tf_weighting == TfWeighting::Raw ? static_cast<double>(tf)
                                                            : 1.0 + std::log(static_cast<double>(tf));
    auto slot = hash_feature(feature, config.hash_seed, config.dim);
    slots[slot.index] += slot.sign * weight;
  }
  double sum = 0.0;
  for (double s : slots) sum += s * s;
  if (sum == 0.0) return EmbeddingVector::zeros(config.dim);
  double norm = std::sqrt(sum);
  EmbeddingVector v;
  v.values.resize(config.dim);
  for (std::size_t i = 0; i < config.dim; ++i) v.values[i] = static_cast<float>(slots[i] / norm);
  return v;
}

inline std::vector<std::pair<std::string, std::size_t>> count_features(std::vector<std::string> features) {
  std::vector<std::pair<std::string, std::size_t>> counted;
  std::unordered_map<std::string, std::size_t> position;
  for (auto& f : features) {
    auto [it, inserted] = position.try_emplace(f, counted.size());
    if (inserted)
      counted.emplace_back(std::move(f), 1);
    else
      ++counted[it->second].second;
  }
  return counted;
}

}  // namespace detail

inline EmbeddingVector embed(std::string_view input, const EncoderConfig& config = {}) {
  return detail::accumulate(detail::count_features(tokenize(input, config)), config);
}

// Dot product over norms; zero-sentinel operands score 0.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimensionMismatch, fmt::format("cosine of dim {} and dim {}", a.dim(), b.dim()));
  if (a.zero || b.zero) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Rescales to unit norm; all-zero input becomes the zero sentinel.
inline EmbeddingVector normalized(std::vector<float> values) {
  double sum = 0.0;
  for (float x : values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::MalformedResponse, "vector contains NaN or Inf");
    sum += static_cast<double>(x) * x;
  }
  if (sum == 0.0) return EmbeddingVector::zeros(values.size());
  double norm = std::sqrt(sum);
  for (float& x : values) x = static_cast<float>(x / norm);
  return {std::move(values), false};
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dim() const = 0;

  // One unit-norm (or zero-sentinel) vector per input, in input order.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;

  // Stable description of the provider configuration, used to key caches.
  virtual std::string fingerprint() const = 0;
};

class HashingEncoder final : public EmbeddingProvider {
 public:
  explicit HashingEncoder(EncoderConfig config = {}) : config_(config) { config_.validate(); }

  std::size_t dim() const override { return config_.dim; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t, config_));
    return out;
  }

  std::string fingerprint() const override { return "hashing:" + config_.canonical(); }

  const EncoderConfig& config() const noexcept { return config_; }

 private:
  EncoderConfig config_;
};

// ---------------------------------------------------------------------------
// Vector cache file: "RRV1", u32 dim, u64 count (little-endian), then count
// records of (u64 id hash, dim x float32).

struct CachedVector {
  std::uint64_t id_hash;
  EmbeddingVector vector;
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw Error(ErrorCode::InvalidInput, "vector cache truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  off += sizeof(T);
  return v;
}

}  // namespace detail

inline std::string encode_vector_cache(std::size_t dim, std::span<const CachedVector> records) {
  std::string out = "RRV1";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  detail::put_le<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    if (r.vector.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "cache record dim differs from header");
    detail::put_le<std::uint64_t>(out, r.id_hash);
    for (float x : r.vector.values) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

struct VectorCacheFile {
  std::size_t dim = 0;
  std::vector<CachedVector> records;
};

inline VectorCacheFile decode_vector_cache(std::string_view data) {
  if (data.substr(0, 4) != "RRV1") throw Error(ErrorCode::InvalidInput, "vector cache magic is not RRV1");
  std::size_t off = 4;
  VectorCacheFile file;
  file.dim = detail::get_le<std::uint32_t>(data, off);
  auto count = detail::get_le<std::uint64_t>(data, off);
  if (file.dim == 0 || count > (data.size() - off) / (8 + 4 * file.dim))
    throw Error(ErrorCode::InvalidInput, "vector cache header inconsistent with file size");
  file.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CachedVector r;
    r.id_hash = detail::get_le<std::uint64_t>(data, off);
    r.vector.values.resize(file.dim);
    bool all_zero = true;
    for (auto& x : r.vector.values) {
      x = std::bit_cast<float>(detail::get_le<std::uint32_t>(data, off));
      all_zero = all_zero && x == 0.0f;
    }
    r.vector.zero = all_zero;
    file.records.push_back(std::move(r));
  }
  if (off != data.size()) throw Error(ErrorCode::InvalidInput, "trailing bytes after vector cache records");
  return file;
}

}  // namespace riskradar
