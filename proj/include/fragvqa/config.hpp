#pragma once

// Pipeline configuration and its TOML-style file format:
//
//   # comment
//   [frag]
//   patch_size = 16
//   [backend]
//   kind = "toy"
//   mean = [0.485, 0.456, 0.406]
//
// Values are integers, floats, booleans, double-quoted strings or flat numeric arrays.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fragvqa/backend.hpp"
#include "fragvqa/chunking.hpp"
#include "fragvqa/errors.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/train.hpp"

namespace fragvqa {

struct PipelineConfig {
  FragConfig frag;
  ChunkConfig chunk;
  BackendSpec backend;
  TrainConfig train;
  std::filesystem::path models_dir;
  int jobs = 1;
  std::size_t repeats = 21;
  // Set when the backend input size was given explicitly rather than following frag.target_size.
  std::optional<int> backend_input_size;
};

// Cross-field checks; run before any work starts.
inline void validate(const PipelineConfig& c) {
  validate(c.frag);
  validate(c.backend);
  validate(c.train);
  if (c.backend.input_size != c.frag.target_size) {
    throw UsageError("backend input size (" + std::to_string(c.backend.input_size) +
                     ") must equal fragment target size (" + std::to_string(c.frag.target_size) + ")");
  }
  if (c.chunk.chunk_length < 0) throw UsageError("chunk_length must be >= 0");
  if (c.jobs < 1) throw UsageError("jobs must be >= 1");
  if (c.repeats < 1) throw UsageError("repeats must be >= 1");
}

// Re-derives fields that follow other fields unless they were set explicitly.
inline void resolve(PipelineConfig& c) {
  c.backend.input_size = c.backend_input_size.value_or(c.frag.target_size);
  if (c.backend.kind == BackendKind::neural_interchange) c.backend.model_path = c.models_dir;
}

namespace detail {

using ConfigValue = std::variant<std::int64_t, double, bool, std::string, std::vector<double>>;

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline ConfigValue parse_value(std::string_view raw, int line) {
  const auto s = trim(raw);
  auto fail = [&](const std::string& why) {
    return UsageError("config line " + std::to_string(line) + ": " + why);
  };
  if (s.empty()) throw fail("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw fail("unterminated string");
    return std::string(s.substr(1, s.size() - 2));
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') throw fail("unterminated array");
    std::vector<double> out;
    auto body = s.substr(1, s.size() - 2);
    while (!trim(body).empty()) {
      const auto comma = body.find(',');
      const auto item = body.substr(0, comma);
      auto v = parse_number(item);
      if (!v) throw fail("bad array element '" + std::string(trim(item)) + "'");
      out.push_back(*v);
      if (comma == std::string_view::npos) break;
      body = body.substr(comma + 1);
    }
    return out;
  }
  const bool integral = s.find_first_of(".eE") == std::string_view::npos;
  if (integral) {
    std::int64_t v = 0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
  }
  if (auto v = parse_number(s)) return *v;
  throw fail("cannot parse value '" + std::string(s) + "'");
}

inline std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

struct Entry {
  ConfigValue value;
  int line;
};

inline double as_double(const Entry& e, const std::string& key) {
  if (auto* i = std::get_if<std::int64_t>(&e.value)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&e.value)) return *d;
  throw UsageError("config line " + std::to_string(e.line) + ": '" + key + "' must be a number");
}

inline std::int64_t as_int(const Entry& e, const std::string& key) {
  if (auto* i = std::get_if<std::int64_t>(&e.value)) return *i;
  throw UsageError("config line " + std::to_string(e.line) + ": '" + key + "' must be an integer");
}

inline std::string as_string(const Entry& e, const std::string& key) {
  if (auto* s = std::get_if<std::string>(&e.value)) return *s;
  throw UsageError("config line " + std::to_string(e.line) + ": '" + key + "' must be a string");
}

inline std::array<double, 3> as_triple(const Entry& e, const std::string& key) {
  auto* v = std::get_if<std::vector<double>>(&e.value);
  if (!v || v->size() != 3) {
    throw UsageError("config line " + std::to_string(e.line) + ": '" + key + "' must be an array of 3 numbers");
  }
  return {(*v)[0], (*v)[1], (*v)[2]};
}

}  // namespace detail

inline Sampling parse_sampling(const std::string& s) {
  if (s == "all" || s == "all_frames") return Sampling::all_frames;
  if (s == "every-other" || s == "every_other" || s == "every_other_frame") return Sampling::every_other_frame;
  throw UsageError("unknown sampling '" + s + "' (expected all or every-other)");
}

inline BackendKind parse_backend_kind(const std::string& s) {
  if (s == "toy") return BackendKind::toy_deterministic;
  if (s == "neural" || s == "onnx") return BackendKind::neural_interchange;
  throw UsageError("unknown backend '" + s + "' (expected toy or neural)");
}

// Applies a config document on top of `base`.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig cfg = {}) {
  std::map<std::string, detail::Entry> entries;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string stripped = detail::strip_comment(raw);
    const auto line = detail::trim(stripped);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("config line " + std::to_string(line_no) + ": bad section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = std::string(detail::trim(line.substr(0, eq)));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    entries[full] = {detail::parse_value(line.substr(eq + 1), line_no), line_no};
  }

  for (const auto& [key, e] : entries) {
    using namespace detail;
    if (key == "frag.patch_size") cfg.frag.patch_size = static_cast<int>(as_int(e, key));
    else if (key == "frag.target_size") cfg.frag.target_size = static_cast<int>(as_int(e, key));
    else if (key == "frag.resize_filter") {
      if (as_string(e, key) != "bilinear") throw UsageError("only the bilinear resize filter is supported");
    }
    else if (key == "chunk.chunk_length") cfg.chunk.chunk_length = static_cast<int>(as_int(e, key));
    else if (key == "chunk.sampling") cfg.chunk.sampling = parse_sampling(as_string(e, key));
    else if (key == "backend.kind") cfg.backend.kind = parse_backend_kind(as_string(e, key));
    else if (key == "backend.models_dir" || key == "io.models_dir") cfg.models_dir = as_string(e, key);
    else if (key == "backend.slow_dim") cfg.backend.slow_dim = static_cast<int>(as_int(e, key));
    else if (key == "backend.fast_dim") cfg.backend.fast_dim = static_cast<int>(as_int(e, key));
    else if (key == "backend.spatial_dim") cfg.backend.spatial_dim = static_cast<int>(as_int(e, key));
    else if (key == "backend.input_size") cfg.backend_input_size = static_cast<int>(as_int(e, key));
    else if (key == "backend.clip_len") cfg.backend.clip_len = static_cast<int>(as_int(e, key));
    else if (key == "backend.slow_subsample") cfg.backend.slow_subsample = static_cast<int>(as_int(e, key));
    else if (key == "backend.mean") cfg.backend.mean = as_triple(e, key);
    else if (key == "backend.std") cfg.backend.std = as_triple(e, key);
    else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(as_int(e, key));
    else if (key == "train.lr0") cfg.train.lr0 = as_double(e, key);
    else if (key == "train.weight_decay") cfg.train.weight_decay = as_double(e, key);
    else if (key == "train.momentum") cfg.train.momentum = as_double(e, key);
    else if (key == "train.batch_size") cfg.train.batch_size = static_cast<std::size_t>(as_int(e, key));
    else if (key == "train.mae_w") cfg.train.mae_w = as_double(e, key);
    else if (key == "train.rank_w") cfg.train.rank_w = as_double(e, key);
    else if (key == "train.rank_margin") cfg.train.rank_margin = as_double(e, key);
    else if (key == "train.swa_start_frac") cfg.train.swa_start_frac = as_double(e, key);
    else if (key == "train.seed") cfg.train.seed = static_cast<std::uint64_t>(as_int(e, key));
    else if (key == "train.split") cfg.train.split = as_double(e, key);
    else if (key == "train.dropout") cfg.train.dropout = as_double(e, key);
    else if (key == "train.hidden1") cfg.train.hidden1 = static_cast<int>(as_int(e, key));
    else if (key == "train.hidden2") cfg.train.hidden2 = static_cast<int>(as_int(e, key));
    else if (key == "eval.repeats") cfg.repeats = static_cast<std::size_t>(as_int(e, key));
    else if (key == "io.jobs") cfg.jobs = static_cast<int>(as_int(e, key));
    else throw UsageError("config line " + std::to_string(e.line) + ": unknown key '" + key + "'");
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse_config(in, std::move(base));
}

}  // namespace fragvqa
