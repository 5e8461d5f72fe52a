#pragma once
// Minimal reader for zip archives holding exactly one member (the shape of
// GDELT's *.gkg.csv.zip downloads). Stored and deflated members only.

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <zlib.h>

#include "riskradar/error.hpp"

namespace riskradar::zip {

namespace detail {

inline std::uint32_t le16(std::string_view d, std::size_t off) {
  if (off + 2 > d.size()) throw Error(ErrorCode::BadArchive, "truncated zip structure");
  return static_cast<std::uint32_t>(static_cast<unsigned char>(d[off])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[off + 1])) << 8;
}

inline std::uint32_t le32(std::string_view d, std::size_t off) {
  return le16(d, off) | le16(d, off + 2) << 16;
}

inline constexpr std::uint32_t kLocalHeader = 0x04034b50;
inline constexpr std::uint32_t kCentralHeader = 0x02014b50;
inline constexpr std::uint32_t kEndOfCentralDir = 0x06054b50;

}  // namespace detail

inline bool looks_like_zip(std::string_view data) {
  return data.size() >= 4 && data[0] == 'P' && data[1] == 'K' &&
         ((data[2] == 3 && data[3] == 4) || (data[2] == 5 && data[3] == 6));
}

inline std::string extract_single_member(std::string_view data, std::size_t max_bytes) {
  using detail::le16;
  using detail::le32;
  if (data.size() < 22) throw Error(ErrorCode::BadArchive, "zip too short");

  std::size_t eocd = std::string_view::npos;
  std::size_t lowest = data.size() > 22 + 65535 ? data.size() - 22 - 65535 : 0;
  for (std::size_t pos = data.size() - 22 + 1; pos-- > lowest;) {
    if (le32(data, pos) == detail::kEndOfCentralDir) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string_view::npos) throw Error(ErrorCode::BadArchive, "no end-of-central-directory record");

  std::uint32_t entries = le16(data, eocd + 10);
  if (entries != 1)
    throw Error(ErrorCode::BadArchive, "zip holds " + std::to_string(entries) + " members, expected exactly 1");

  std::size_t central = le32(data, eocd + 16);
  if (le32(data, central) != detail::kCentralHeader) throw Error(ErrorCode::BadArchive, "bad central directory");
  std::uint32_t method = le16(data, central + 10);
  std::uint32_t crc = le32(data, central + 16);
  std::uint32_t compressed = le32(data, central + 20);
  std::uint32_t uncompressed = le32(data, central + 24);
  std::size_t local = le32(data, central + 42);
  if (compressed == 0xFFFFFFFFu || uncompressed == 0xFFFFFFFFu)
    throw Error(ErrorCode::BadArchive, "zip64 archives are not supported");
  if (uncompressed > max_bytes)
    throw Error(ErrorCode::SizeCapExceeded, "zip member of " + std::to_string(uncompressed) + " bytes exceeds cap");

  if (le32(data, local) != detail::kLocalHeader) throw Error(ErrorCode::BadArchive, "bad local file header");
  std::size_t begin = local + 30 + le16(data, local + 26) + le16(data, local + 28);
  if (begin > data.size() || compressed > data.size() - begin)
    throw Error(ErrorCode::BadArchive, "zip member data truncated");
  std::string_view payload = data.substr(begin, compressed);

  std::string out;
  if (method == 0) {
    out.assign(payload);
  } else if (method == 8) {
    out.resize(uncompressed);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(ErrorCode::BadArchive, "inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(payload.data()));
    zs.avail_in = static_cast<uInt>(payload.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    std::size_t produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != uncompressed)
      throw Error(ErrorCode::BadArchive, "deflate stream is corrupt");
  } else {
    throw Error(ErrorCode::BadArchive, "unsupported compression method " + std::to_string(method));
  }

  if (out.size() != uncompressed) throw Error(ErrorCode::BadArchive, "member size mismatch");
  auto actual = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
  if (actual != crc) throw Error(ErrorCode::BadArchive, "member CRC mismatch");
  return out;
}

}  // namespace riskradar::zip
