#pragma once

// DVQF feature files.
//
//   "DVQF" | u32 version | u32 dim | u32 video_count |
//   video_count x ( u32 id_len | id bytes (UTF-8) | dim x f32 )
//
// All integers and floats little-endian. A JSON sidecar "<file>.json" maps each id to
// {"path", "mos", "chunk_count"}.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragvqa/errors.hpp"

namespace fragvqa {

inline constexpr std::uint32_t kDvqfVersion = 1;

struct FeatureRecord {
  std::string id;
  std::vector<float> values;
  // Sidecar fields.
  std::string path;
  std::optional<double> mos;
  std::int64_t chunk_count = 0;
};

struct FeatureSet {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> records;

  const FeatureRecord* find(const std::string& id) const {
    for (const auto& r : records) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Write to a temporary file and rename over the target.
inline void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace '" + path.string() + "': " + ec.message());
}

}  // namespace detail

inline std::string encode_dvqf(const FeatureSet& set) {
  std::string out = "DVQF";
  detail::put_u32(out, kDvqfVersion);
  detail::put_u32(out, set.dim);
  detail::put_u32(out, static_cast<std::uint32_t>(set.records.size()));
  for (const auto& r : set.records) {
    if (r.values.size() != set.dim) {
      throw ShapeError("record '" + r.id + "' has " + std::to_string(r.values.size()) + " values, file dim is " +
                       std::to_string(set.dim));
    }
    detail::put_u32(out, static_cast<std::uint32_t>(r.id.size()));
    out += r.id;
    for (float v : r.values) detail::put_f32(out, v);
  }
  return out;
}

inline FeatureSet decode_dvqf(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  std::size_t pos = 0;
  auto need = [&](std::size_t k) {
    if (n - pos < k) throw FormatError("truncated DVQF file at byte " + std::to_string(pos));
  };
  need(16);
  if (std::memcmp(p, "DVQF", 4) != 0) throw FormatError("not a DVQF file (bad magic)");
  const auto version = detail::get_u32(p + 4);
  if (version != kDvqfVersion) throw FormatError("unsupported DVQF version " + std::to_string(version));
  FeatureSet set;
  set.dim = detail::get_u32(p + 8);
  const auto count = detail::get_u32(p + 12);
  pos = 16;
  set.records.reserve(std::min<std::size_t>(count, (n - pos) / 4));
  for (std::uint32_t i = 0; i < count; ++i) {
    need(4);
    const auto id_len = detail::get_u32(p + pos);
    pos += 4;
    need(id_len);
    FeatureRecord r;
    r.id.assign(bytes, pos, id_len);
    pos += id_len;
    need(static_cast<std::size_t>(set.dim) * 4);
    r.values.resize(set.dim);
    for (std::uint32_t k = 0; k < set.dim; ++k, pos += 4) r.values[k] = detail::get_f32(p + pos);
    set.records.push_back(std::move(r));
  }
  if (pos != n) throw FormatError("trailing bytes after DVQF records");
  return set;
}

inline nlohmann::json sidecar_json(const FeatureSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& r : set.records) {
    j[r.id] = {{"path", r.path},
               {"mos", r.mos ? nlohmann::json(*r.mos) : nlohmann::json(nullptr)},
               {"chunk_count", r.chunk_count}};
  }
  return j;
}

inline void save_features(const std::filesystem::path& path, const FeatureSet& set) {
  detail::write_atomically(path, encode_dvqf(set));
  detail::write_atomically(detail::sidecar_path(path), sidecar_json(set).dump(2) + "\n");
}

// Loads a DVQF file and, when present, merges its sidecar.
inline FeatureSet load_features(const std::filesystem::path& path) {
  FeatureSet set = decode_dvqf(detail::read_all(path));
  const auto side = detail::sidecar_path(path);
  if (std::filesystem::exists(side)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_all(side));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad feature sidecar '" + side.string() + "': " + e.what());
    }
    for (auto& r : set.records) {
      if (!j.contains(r.id)) continue;
      const auto& e = j[r.id];
      r.path = e.value("path", std::string{});
      if (e.contains("mos") && e["mos"].is_number()) r.mos = e["mos"].get<double>();
      r.chunk_count = e.value("chunk_count", std::int64_t{0});
    }
  }
  return set;
}

}  // namespace fragvqa
