#pragma once

// Frame ingestion: YUV4MPEG2 streams and raw interleaved RGB24 files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fragvqa/errors.hpp"
#include "fragvqa/image.hpp"

namespace fragvqa {

struct Rational {
  std::int64_t num = 30;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct VideoMeta {
  int width = 0;
  int height = 0;
  Rational frame_rate;
  std::optional<std::int64_t> frame_count;

  friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

inline void validate(const VideoMeta& meta) {
  if (meta.width < 1 || meta.height < 1) {
    throw FormatError("video dimensions must be positive, got " + std::to_string(meta.width) +
                      "x" + std::to_string(meta.height));
  }
  if (meta.frame_rate.num <= 0 || meta.frame_rate.den <= 0) {
    throw FormatError("frame rate must be positive, got " + std::to_string(meta.frame_rate.num) +
                      ":" + std::to_string(meta.frame_rate.den));
  }
}

enum class ChromaFormat { yuv420, yuv422, yuv444 };

// ---------------------------------------------------------------------------
// Colorspace: BT.601 full range, round half away from zero, clamp to [0,255].

inline std::uint8_t clamp_round(double v) noexcept {
  double r = std::round(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

inline void yuv_to_rgb(std::uint8_t y, std::uint8_t u, std::uint8_t v, std::uint8_t* rgb) noexcept {
  const double yy = y;
  const double cb = static_cast<double>(u) - 128.0;
  const double cr = static_cast<double>(v) - 128.0;
  rgb[0] = clamp_round(yy + 1.402 * cr);
  rgb[1] = clamp_round(yy - 0.344136 * cb - 0.714136 * cr);
  rgb[2] = clamp_round(yy + 1.772 * cb);
}

inline void rgb_to_yuv(std::uint8_t r, std::uint8_t g, std::uint8_t b, std::uint8_t* yuv) noexcept {
  const double rr = r, gg = g, bb = b;
  yuv[0] = clamp_round(0.299 * rr + 0.587 * gg + 0.114 * bb);
  yuv[1] = clamp_round(128.0 - 0.168736 * rr - 0.331264 * gg + 0.5 * bb);
  yuv[2] = clamp_round(128.0 + 0.5 * rr - 0.418688 * gg - 0.081312 * bb);
}

// ---------------------------------------------------------------------------

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const VideoMeta& meta() const = 0;
  // Next frame in display order, or nullopt at end of stream.
  virtual std::optional<Frame> next() = 0;
};

namespace detail {

inline std::int64_t parse_positive(std::string_view text, std::string_view what, std::size_t offset) {
  if (text.empty()) throw ParseError("empty " + std::string(what), offset);
  std::int64_t v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw ParseError("invalid " + std::string(what) + " '" + std::string(text) + "'", offset);
    }
    v = v * 10 + (c - '0');
    if (v > (std::int64_t{1} << 40)) {
      throw ParseError(std::string(what) + " out of range", offset);
    }
  }
  if (v <= 0) throw ParseError(std::string(what) + " must be positive", offset);
  return v;
}

inline ChromaFormat parse_chroma_tag(std::string_view tag, std::size_t offset) {
  if (tag == "420" || tag == "420jpeg" || tag == "420paldv" || tag == "420mpeg2") {
    return ChromaFormat::yuv420;
  }
  if (tag == "422") return ChromaFormat::yuv422;
  if (tag == "444") return ChromaFormat::yuv444;
  const std::string full = "C" + std::string(tag);
  if (tag.find('p') != std::string_view::npos) {
    throw UnsupportedFormatError("unsupported bit depth (only 8-bit is decoded)", full);
  }
  if (tag.empty()) throw ParseError("empty colorspace tag", offset);
  throw UnsupportedFormatError("unsupported chroma subsampling", full);
}

}  // namespace detail

// Sequential YUV4MPEG2 decoder. Frames are converted to RGB on the fly.
class Y4mReader final : public FrameSource {
 public:
  explicit Y4mReader(std::istream& in) : in_(&in) { read_header(); }

  explicit Y4mReader(const std::filesystem::path& path)
      : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)), in_(owned_.get()) {
    if (!*owned_) throw IoError("cannot open video '" + path.string() + "'");
    read_header();
  }

  const VideoMeta& meta() const override { return meta_; }
  ChromaFormat chroma() const noexcept { return chroma_; }

  std::optional<Frame> next() override {
    const std::size_t frame_start = offset_;
    std::string marker;
    int ch = in_->get();
    if (ch == std::char_traits<char>::eof()) return std::nullopt;
    ++offset_;
    marker.push_back(static_cast<char>(ch));
    while (marker.size() < 5) {
      ch = in_->get();
      if (ch == std::char_traits<char>::eof()) {
        throw ParseError("truncated FRAME marker", frame_start);
      }
      ++offset_;
      marker.push_back(static_cast<char>(ch));
    }
    if (marker != "FRAME") throw ParseError("expected FRAME marker", frame_start);
    // Per-frame parameters are accepted and ignored.
    for (std::size_t n = 0;; ++n) {
      ch = in_->get();
      if (ch == std::char_traits<char>::eof()) throw ParseError("unterminated FRAME header", frame_start);
      ++offset_;
      if (ch == '\n') break;
      if (n > 4096) throw ParseError("FRAME header too long", frame_start);
    }

    const std::size_t expected = payload_bytes();
    buffer_.resize(expected);
    in_->read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(expected));
    const auto received = static_cast<std::size_t>(in_->gcount());
    if (received != expected) {
      throw ParseError("truncated frame payload: expected " + std::to_string(expected) +
                           " bytes, received " + std::to_string(received),
                       offset_);
    }
    offset_ += expected;
    return Frame{next_index_++, convert()};
  }

 private:
  void read_header() {
    std::string line;
    for (;;) {
      int ch = in_->get();
      if (ch == std::char_traits<char>::eof()) throw ParseError("unterminated stream header", offset_);
      ++offset_;
      if (ch == '\n') break;
      line.push_back(static_cast<char>(ch));
      if (line.size() > 4096) throw ParseError("stream header too long", 0);
    }
    constexpr std::string_view kMagic = "YUV4MPEG2";
    if (line.compare(0, kMagic.size(), kMagic) != 0) {
      throw ParseError("missing YUV4MPEG2 signature", 0);
    }
    bool have_w = false, have_h = false, have_f = false;
    std::size_t pos = kMagic.size();
    while (pos < line.size()) {
      if (line[pos] == ' ') {
        ++pos;
        continue;
      }
      std::size_t end = line.find(' ', pos);
      if (end == std::string::npos) end = line.size();
      const std::string_view token(line.data() + pos, end - pos);
      const std::string_view value = token.substr(1);
      switch (token[0]) {
        case 'W':
          meta_.width = static_cast<int>(detail::parse_positive(value, "width", pos));
          have_w = true;
          break;
        case 'H':
          meta_.height = static_cast<int>(detail::parse_positive(value, "height", pos));
          have_h = true;
          break;
        case 'F': {
          const auto colon = value.find(':');
          if (colon == std::string_view::npos) throw ParseError("frame rate lacks ':'", pos);
          meta_.frame_rate.num = detail::parse_positive(value.substr(0, colon), "frame rate numerator", pos);
          meta_.frame_rate.den = detail::parse_positive(value.substr(colon + 1), "frame rate denominator", pos);
          have_f = true;
          break;
        }
        case 'C':
          chroma_ = detail::parse_chroma_tag(value, pos);
          break;
        case 'I':
        case 'A':
        case 'X':
          break;
        default:
          throw ParseError("unknown header tag '" + std::string(token) + "'", pos);
      }
      pos = end;
    }
    if (!have_w || !have_h) throw ParseError("header lacks W or H", offset_ - 1);
    if (!have_f) throw ParseError("header lacks F", offset_ - 1);
    chroma_w_ = chroma_ == ChromaFormat::yuv444 ? meta_.width : (meta_.width + 1) / 2;
    chroma_h_ = chroma_ == ChromaFormat::yuv420 ? (meta_.height + 1) / 2 : meta_.height;
  }

  std::size_t payload_bytes() const noexcept {
    return static_cast<std::size_t>(meta_.width) * meta_.height +
           2 * static_cast<std::size_t>(chroma_w_) * chroma_h_;
  }

  Image convert() const {
    Image out(meta_.width, meta_.height);
    const std::uint8_t* y_plane = buffer_.data();
    const std::uint8_t* u_plane = y_plane + static_cast<std::size_t>(meta_.width) * meta_.height;
    const std::uint8_t* v_plane = u_plane + static_cast<std::size_t>(chroma_w_) * chroma_h_;
    const int sx = chroma_ == ChromaFormat::yuv444 ? 0 : 1;
    const int sy = chroma_ == ChromaFormat::yuv420 ? 1 : 0;
    for (int y = 0; y < meta_.height; ++y) {
      auto row = out.row(y);
      const std::size_t crow = static_cast<std::size_t>(y >> sy) * chroma_w_;
      for (int x = 0; x < meta_.width; ++x) {
        const std::size_t ci = crow + static_cast<std::size_t>(x >> sx);
        yuv_to_rgb(y_plane[static_cast<std::size_t>(y) * meta_.width + x], u_plane[ci], v_plane[ci],
                   row.data() + static_cast<std::size_t>(x) * kChannels);
      }
    }
    return out;
  }

  std::unique_ptr<std::istream> owned_;
  std::istream* in_;
  std::size_t offset_ = 0;
  VideoMeta meta_;
  ChromaFormat chroma_ = ChromaFormat::yuv420;
  int chroma_w_ = 0;
  int chroma_h_ = 0;
  std::int64_t next_index_ = 0;
  std::vector<std::uint8_t> buffer_;
};

// Raw RGB24 frames laid end to end; geometry comes from the caller (usually a JSON sidecar).
class RawRgbReader final : public FrameSource {
 public:
  RawRgbReader(const std::filesystem::path& path, VideoMeta meta) : in_(path, std::ios::binary), meta_(meta) {
    validate(meta_);
    if (!in_) throw IoError("cannot open raw video '" + path.string() + "'");
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
    const std::uint64_t frame_bytes = static_cast<std::uint64_t>(meta_.width) * meta_.height * kChannels;
    if (size % frame_bytes != 0) {
      throw FormatError("raw file size " + std::to_string(size) + " is not a multiple of the " +
                        std::to_string(frame_bytes) + "-byte frame size");
    }
    meta_.frame_count = static_cast<std::int64_t>(size / frame_bytes);
  }

  const VideoMeta& meta() const override { return meta_; }

  std::optional<Frame> next() override {
    if (next_index_ >= *meta_.frame_count) return std::nullopt;
    std::vector<std::uint8_t> data(static_cast<std::size_t>(meta_.width) * meta_.height * kChannels);
    in_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in_.gcount()) != data.size()) {
      throw IoError("short read in raw video at frame " + std::to_string(next_index_));
    }
    return Frame{next_index_++, Image(meta_.width, meta_.height, std::move(data))};
  }

 private:
  std::ifstream in_;
  VideoMeta meta_;
  std::int64_t next_index_ = 0;
};

inline Y4mReader open_y4m(std::istream& in) { return Y4mReader(in); }

inline RawRgbReader open_raw_rgb(const std::filesystem::path& path, const VideoMeta& meta) {
  return RawRgbReader(path, meta);
}

// Sidecar metadata: {"width","height","fps_num","fps_den"}.
inline VideoMeta read_raw_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metadata sidecar '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    VideoMeta meta;
    meta.width = j.at("width").get<int>();
    meta.height = j.at("height").get<int>();
    meta.frame_rate.num = j.at("fps_num").get<std::int64_t>();
    meta.frame_rate.den = j.value("fps_den", std::int64_t{1});
    validate(meta);
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad metadata sidecar '" + path.string() + "': " + e.what());
  }
}

inline void write_raw_meta(const std::filesystem::path& path, const VideoMeta& meta) {
  nlohmann::json j{{"width", meta.width},
                   {"height", meta.height},
                   {"fps_num", meta.frame_rate.num},
                   {"fps_den", meta.frame_rate.den}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline void write_raw_rgb(const std::filesystem::path& path, std::span<const Frame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& f : frames) {
    auto px = f.image.pixels();
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_image_rgb(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  auto px = image.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

// Binary PPM (P6), for inspecting fragments with ordinary image viewers.
inline void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  auto px = image.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Y4M encoder, used for synthetic test content and for piping decoded frames back out.
// Chroma is subsampled by averaging each 2x1 / 2x2 block.
class Y4mWriter {
 public:
  Y4mWriter(std::ostream& out, const VideoMeta& meta, ChromaFormat chroma = ChromaFormat::yuv420)
      : out_(out), meta_(meta), chroma_(chroma) {
    validate(meta_);
    const char* tag = chroma == ChromaFormat::yuv420 ? "420jpeg" : chroma == ChromaFormat::yuv422 ? "422" : "444";
    out_ << "YUV4MPEG2 W" << meta_.width << " H" << meta_.height << " F" << meta_.frame_rate.num << ':'
         << meta_.frame_rate.den << " Ip A1:1 C" << tag << '\n';
  }

  void write(const Image& image) {
    if (image.width() != meta_.width || image.height() != meta_.height) {
      throw ShapeError("frame size does not match stream header");
    }
    const int w = meta_.width, h = meta_.height;
    const int sx = chroma_ == ChromaFormat::yuv444 ? 0 : 1;
    const int sy = chroma_ == ChromaFormat::yuv420 ? 1 : 0;
    const int cw = (w + sx) >> sx, chh = (h + sy) >> sy;
    std::vector<std::uint8_t> yp(static_cast<std::size_t>(w) * h);
    std::vector<double> us(static_cast<std::size_t>(cw) * chh, 0.0), vs(us.size(), 0.0);
    std::vector<int> counts(us.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::uint8_t yuv[3];
        rgb_to_yuv(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2), yuv);
        yp[static_cast<std::size_t>(y) * w + x] = yuv[0];
        const std::size_t ci = static_cast<std::size_t>(y >> sy) * cw + static_cast<std::size_t>(x >> sx);
        us[ci] += yuv[1];
        vs[ci] += yuv[2];
        ++counts[ci];
      }
    }
    std::vector<std::uint8_t> up(us.size()), vp(vs.size());
    for (std::size_t i = 0; i < us.size(); ++i) {
      up[i] = clamp_round(us[i] / counts[i]);
      vp[i] = clamp_round(vs[i] / counts[i]);
    }
    out_ << "FRAME\n";
    out_.write(reinterpret_cast<const char*>(yp.data()), static_cast<std::streamsize>(yp.size()));
    out_.write(reinterpret_cast<const char*>(up.data()), static_cast<std::streamsize>(up.size()));
    out_.write(reinterpret_cast<const char*>(vp.data()), static_cast<std::streamsize>(vp.size()));
    if (!out_) throw IoError("Y4M write failed");
  }

 private:
  std::ostream& out_;
  VideoMeta meta_;
  ChromaFormat chroma_;
};

namespace detail {

// Y4M reader that keeps its own stream alive (used for stdin / in-memory sources).
class OwningY4mSource final : public FrameSource {
 public:
  explicit OwningY4mSource(std::unique_ptr<std::istream> in) : in_(std::move(in)), reader_(*in_) {}
  const VideoMeta& meta() const override { return reader_.meta(); }
  std::optional<Frame> next() override { return reader_.next(); }

 private:
  std::unique_ptr<std::istream> in_;
  Y4mReader reader_;
};

class StdinY4mSource final : public FrameSource {
 public:
  StdinY4mSource() : reader_(std::cin) {}
  const VideoMeta& meta() const override { return reader_.meta(); }
  std::optional<Frame> next() override { return reader_.next(); }

 private:
  Y4mReader reader_;
};

}  // namespace detail

// Opens a video by path: "-" reads Y4M from stdin, *.y4m is Y4M, *.rgb / *.raw is raw RGB24
// with geometry in "<path>.json".
inline std::unique_ptr<FrameSource> open_video(const std::filesystem::path& path) {
  if (path == "-") return std::make_unique<detail::StdinY4mSource>();
  const auto ext = path.extension().string();
  if (ext == ".rgb" || ext == ".raw") {
    auto sidecar = path;
    sidecar += ".json";
    return std::make_unique<RawRgbReader>(path, read_raw_meta(sidecar));
  }
  if (!std::filesystem::exists(path)) throw IoError("video '" + path.string() + "' does not exist");
  return std::make_unique<Y4mReader>(path);
}

// In-memory Y4M source, convenient for synthetic content.
inline std::unique_ptr<FrameSource> open_y4m_buffer(std::string bytes) {
  return std::make_unique<detail::OwningY4mSource>(std::make_unique<std::istringstream>(std::move(bytes)));
}

}  // namespace fragvqa
