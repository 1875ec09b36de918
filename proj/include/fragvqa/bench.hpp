#pragma once

// Per-stage runtime measurements over the same content at several resolutions.

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragvqa/backend.hpp"
#include "fragvqa/chunking.hpp"
#include "fragvqa/errors.hpp"
#include "fragvqa/features.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/frame_io.hpp"
#include "fragvqa/mlp.hpp"
#include "fragvqa/train.hpp"

namespace fragvqa {

inline constexpr std::size_t kDefaultBenchRepeats = 10;

struct BenchInput {
  std::string label;
  std::function<std::unique_ptr<FrameSource>()> open;
};

struct StageMeans {
  double decode = 0.0;
  double fragment = 0.0;
  double extract = 0.0;
  double predict = 0.0;
  double end_to_end = 0.0;
};

struct BenchRow {
  std::string label;
  int width = 0;
  int height = 0;
  std::int64_t chunks = 0;
  StageMeans mean;
  std::vector<StageMeans> runs;
};

struct BenchReport {
  std::size_t repeats = 0;
  std::string backend_id;
  std::vector<BenchRow> rows;
};

// Runs every input `repeats` times after one untimed warm-up round and averages the stage
// times. `model` scores the feature vector; an untrained regressor is used when null.
inline BenchReport run_bench(const std::vector<BenchInput>& inputs, const FragConfig& frag, const ChunkConfig& chunk,
                             FeatureBackend& backend, std::size_t repeats = kDefaultBenchRepeats,
                             const MlpModel* model = nullptr) {
  if (repeats < 1) throw UsageError("bench repeats must be >= 1");
  if (inputs.empty()) throw UsageError("bench needs at least one video");
  const MlpModel fallback = make_mlp({static_cast<int>(backend.spec().fused_dim()), 256, 128}, 0, 0.1);
  const MlpModel& reg = model ? *model : fallback;
  using Clock = std::chrono::steady_clock;

  BenchReport report;
  report.repeats = repeats;
  report.backend_id = backend.id();
  report.rows.resize(inputs.size());

  // Round r of every input runs before round r + 1 of any, so drift in machine load is
  // shared across resolutions. Round 0 is an untimed warm-up.
  for (std::size_t r = 0; r <= repeats; ++r) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      BenchRow& row = report.rows[i];
      const auto t0 = Clock::now();
      auto source = inputs[i].open();
      StageTimes times;
      const VideoFeature v = extract_video<Clock>(*source, frag, chunk, backend, &times);
      const auto t1 = Clock::now();
      volatile double score = predict(reg, v.values);
      (void)score;
      const auto t2 = Clock::now();
      if (r == 0) {
        row.label = inputs[i].label;
        row.width = source->meta().width;
        row.height = source->meta().height;
        row.chunks = v.chunk_count;
        continue;
      }
      row.runs.push_back({times.decode, times.fragment, times.extract,
                          std::chrono::duration<double>(t2 - t1).count(),
                          std::chrono::duration<double>(t2 - t0).count()});
    }
  }
  const double n = static_cast<double>(repeats);
  for (auto& row : report.rows) {
    for (const auto& s : row.runs) {
      row.mean.decode += s.decode / n;
      row.mean.fragment += s.fragment / n;
      row.mean.extract += s.extract / n;
      row.mean.predict += s.predict / n;
      row.mean.end_to_end += s.end_to_end / n;
    }
  }
  return report;
}

inline nlohmann::json bench_json(const BenchReport& report) {
  auto stages = [](const StageMeans& s) {
    return nlohmann::json{{"decode", s.decode},
                          {"fragment", s.fragment},
                          {"extract", s.extract},
                          {"predict", s.predict},
                          {"end_to_end", s.end_to_end}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& s : r.runs) runs.push_back(stages(s));
    rows.push_back({{"label", r.label},
                    {"width", r.width},
                    {"height", r.height},
                    {"chunks", r.chunks},
                    {"mean_seconds", stages(r.mean)},
                    {"runs", runs}});
  }
  return {{"repeats", report.repeats}, {"backend", report.backend_id}, {"resolutions", rows}};
}

}  // namespace fragvqa
