#pragma once

// Deterministic synthetic videos. Content is defined in normalized coordinates, so the
// same scene can be rendered at any resolution (used by bench and the test suites).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "fragvqa/errors.hpp"
#include "fragvqa/frame_io.hpp"
#include "fragvqa/image.hpp"

namespace fragvqa {

struct SynthParams {
  std::uint64_t seed = 0;
  double speed = 1.0;       // square displacement per frame, in units of 1/100 of the width
  double noise = 8.0;       // peak amplitude of the blocky noise texture
  int noise_cells = 48;     // noise cells across the width
  double flicker = 0.0;     // global luminance oscillation amplitude
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

inline Image render_synthetic(int width, int height, std::int64_t t, const SynthParams& sp = {}) {
  if (width < 1 || height < 1) throw UsageError("synthetic frame size must be positive");
  Image img(width, height);
  const double tf = static_cast<double>(t);
  const double cx = 0.15 + 0.7 * std::fmod(0.5 + 0.01 * sp.speed * tf, 1.0);
  const double cy = 0.5 + 0.25 * std::sin(0.21 * sp.speed * tf);
  const double half = 0.12;
  const double aspect = static_cast<double>(width) / height;
  const int cells = std::max(1, sp.noise_cells);
  const double flick = sp.flicker * std::sin(0.9 * tf);
  for (int y = 0; y < height; ++y) {
    const double v = (y + 0.5) / height;
    auto row = img.row(y);
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      double rgb[3] = {40.0 + 170.0 * u, 40.0 + 170.0 * v,
                       128.0 + 60.0 * std::sin(2.0 * std::numbers::pi * (u + v + 0.03 * tf))};
      if (std::abs(u - cx) * aspect < half && std::abs(v - cy) < half) {
        rgb[0] = 230.0;
        rgb[1] = 60.0 + 40.0 * std::sin(0.3 * tf);
        rgb[2] = 50.0;
      }
      const auto cu = static_cast<std::uint64_t>(u * cells);
      const auto cv = static_cast<std::uint64_t>(v * cells * height / width);
      const std::uint64_t h = detail::mix64(sp.seed ^ detail::mix64(cu * 7919 + cv * 104729 +
                                                                    static_cast<std::uint64_t>(t) * 1299709));
      const double n = sp.noise * ((static_cast<double>(h >> 11) / 9007199254740992.0) * 2.0 - 1.0);
      for (int c = 0; c < kChannels; ++c) {
        const double val = std::clamp(rgb[c] + n + flick, 0.0, 255.0);
        row[static_cast<std::size_t>(x) * kChannels + c] = static_cast<std::uint8_t>(std::lround(val));
      }
    }
  }
  return img;
}

// Y4M (4:2:0) bytes of `frames` synthetic frames.
inline std::string synthetic_y4m(int width, int height, int frames, Rational fps, const SynthParams& sp = {}) {
  std::ostringstream out(std::ios::binary);
  Y4mWriter writer(out, VideoMeta{width, height, fps, std::nullopt}, ChromaFormat::yuv420);
  for (int t = 0; t < frames; ++t) writer.write(render_synthetic(width, height, t, sp));
  return out.str();
}

inline void write_synthetic_y4m(const std::filesystem::path& path, int width, int height, int frames, Rational fps,
                                const SynthParams& sp = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create '" + path.string() + "'");
  const auto bytes = synthetic_y4m(width, height, frames, fps, sp);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace fragvqa
