#pragma once

// Labels CSV: a `video_id,mos` header followed by one row per video.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fragvqa/errors.hpp"

namespace fragvqa {

struct Label {
  std::string video_id;
  double mos = 0.0;
};

inline std::vector<Label> parse_labels(std::istream& in, const std::string& name = "labels") {
  std::vector<Label> out;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line_no == 1) {
      if (line != "video_id,mos") throw FormatError(name + ": expected header 'video_id,mos', got '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(name + " line " + std::to_string(line_no) + ": missing ','");
    Label l{trim(line.substr(0, comma)), 0.0};
    const std::string value = trim(line.substr(comma + 1));
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), l.mos);
    if (l.video_id.empty() || ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(l.mos)) {
      throw FormatError(name + " line " + std::to_string(line_no) + ": bad row '" + line + "'");
    }
    if (!seen.insert(l.video_id).second) {
      throw FormatError(name + " line " + std::to_string(line_no) + ": duplicate video id '" + l.video_id + "'");
    }
    out.push_back(std::move(l));
  }
  if (line_no == 0) throw FormatError(name + " is empty");
  return out;
}

inline std::vector<Label> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels '" + path.string() + "'");
  return parse_labels(in, path.string());
}

}  // namespace fragvqa
