// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Every tolerance and time limit is fixed below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragvqa/backend.hpp"
#include "fragvqa/chunking.hpp"
#include "fragvqa/features.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/frame_io.hpp"
#include "fragvqa/loss.hpp"
#include "fragvqa/metrics.hpp"
#include "fragvqa/mlp.hpp"
#include "fragvqa/synth.hpp"
#include "fragvqa/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fragvqa;
namespace fs = std::filesystem;

namespace {

constexpr double kTopTLimitSeconds = 1.0;
constexpr double kFragOracleLimitSeconds = 30.0;
constexpr double kGradLimitSeconds = 10.0;
constexpr double kGradEps = 1e-5;
constexpr double kGradAbsTol = 1e-6;
constexpr double kGradRelTol = 1e-4;
constexpr double kOverfitLimitSeconds = 120.0;
constexpr double kOverfitMinSrcc = 0.95;
constexpr double kNullMaxAbsSrcc = 0.4;
constexpr double kMetricTol = 1e-12;
constexpr double kBenchExtractLo = 0.8;
constexpr double kBenchExtractHi = 1.25;
constexpr double kBenchFragmentMax = 20.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++g_failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " (" << std::fixed << std::setprecision(2)
            << secs << "s)" << std::endl;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FRAGVQA_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Image random_image(int w, int h, std::mt19937_64& rng, int hi) {
  std::uniform_int_distribution<int> d(0, hi);
  Image img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

// ---------------------------------------------------------------------------

Outcome top_t_law() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0;
  for (std::int64_t s = 1; s <= 512; ++s) {
    for (std::int64_t p = 1; p <= s; ++p) {
      const auto expect = oracle::ceil_div_brute(static_cast<std::uint64_t>(s * s), static_cast<std::uint64_t>(p * p));
      if (top_t_count(s, p) != expect) {
        return {false, "mismatch at s=" + std::to_string(s) + " p=" + std::to_string(p)};
      }
      ++checked;
    }
  }
  const double secs = since(t0);
  return {secs < kTopTLimitSeconds, std::to_string(checked) + " (s,p) pairs exact, " + fmt(secs) + "s < " +
                                        fmt(kTopTLimitSeconds) + "s"};
}

Outcome fragmentation_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  const int patch_sizes[] = {8, 16, 32};
  std::size_t wraps = 0, tied = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int w = 33, h = 47;
    if (trial == 199) {
      w = h = 512;
    } else if (trial > 0) {
      w = std::uniform_int_distribution<int>(33, 512)(rng);
      h = std::uniform_int_distribution<int>(47, 512)(rng);
    }
    const int p = patch_sizes[trial % 3];
    // Narrow value ranges on some trials force score ties.
    const int hi = trial % 4 == 0 ? 1 : 255;
    const Image prev = random_image(w, h, rng, hi);
    const Image cur = random_image(w, h, rng, hi);
    const auto expect_scores = oracle::patch_sums(cur, prev, p);
    const PatchGrid grid = pair_patch_scores(cur, prev, p);
    if (grid.size() != expect_scores.size()) return {false, "grid size mismatch in trial " + std::to_string(trial)};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (grid.scores[i].score != expect_scores[i]) return {false, "score mismatch in trial " + std::to_string(trial)};
    }
    const std::size_t t = top_t_count(224, p);
    const auto expect_idx = oracle::top_indices(expect_scores, t);
    const auto coords = select_top_patches(grid, t);
    const FragmentTriplet trip = fragment_pair(Frame{0, prev}, Frame{1, cur}, FragConfig{p, 224});
    if (coords.size() != t || trip.coords.size() != t) return {false, "wrong T in trial " + std::to_string(trial)};
    for (std::size_t k = 0; k < t; ++k) {
      const auto idx = expect_idx[k];
      const PatchCoord c{static_cast<int>(idx / static_cast<std::size_t>(grid.cols)),
                         static_cast<int>(idx % static_cast<std::size_t>(grid.cols))};
      if (!(coords[k] == c) || !(trip.coords[k] == c) || trip.scores[k] != expect_scores[idx]) {
        return {false, "selection mismatch in trial " + std::to_string(trial) + " slot " + std::to_string(k)};
      }
    }
    wraps += expect_scores.size() < t;
    std::vector<std::uint64_t> sorted = expect_scores;
    std::sort(sorted.begin(), sorted.end());
    tied += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }
  const double secs = since(t0);
  return {secs < kFragOracleLimitSeconds, "200 pairs exact (" + std::to_string(wraps) + " with wrap-around, " +
                                              std::to_string(tied) + " with tied scores), " + fmt(secs) + "s < " +
                                              fmt(kFragOracleLimitSeconds) + "s"};
}

Outcome alignment() {
  std::mt19937_64 rng(77);
  const int patch_sizes[] = {8, 16, 32};
  std::size_t patches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = patch_sizes[trial % 3];
    const int w = std::uniform_int_distribution<int>(std::max(p, 33), 400)(rng);
    const int h = std::uniform_int_distribution<int>(std::max(p, 33), 400)(rng);
    // Mostly the default canvas, sometimes one that p does not divide.
    const int s = trial % 5 == 4 ? std::uniform_int_distribution<int>(p, 200)(rng) : 224;
    const Image prev = random_image(w, h, rng, 255);
    const Image cur = random_image(w, h, rng, 255);
    const auto trip = fragment_pair(Frame{10, prev}, Frame{11, cur}, FragConfig{p, s});
    const int per_row = (s + p - 1) / p;
    for (std::size_t k = 0; k < trip.coords.size(); ++k) {
      const int dy0 = static_cast<int>(k / static_cast<std::size_t>(per_row)) * p;
      const int dx0 = static_cast<int>(k % static_cast<std::size_t>(per_row)) * p;
      if (dy0 >= s) break;
      const auto [r, c] = trip.coords[k];
      for (int y = 0; y < std::min(p, s - dy0); ++y) {
        for (int x = 0; x < std::min(p, s - dx0); ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            const int a = cur.at(c * p + x, r * p + y, ch);
            const int b = prev.at(c * p + x, r * p + y, ch);
            if (trip.frag_frame.at(dx0 + x, dy0 + y, ch) != a ||
                trip.frag_residual.at(dx0 + x, dy0 + y, ch) != std::abs(a - b)) {
              return {false, "trial " + std::to_string(trial) + " slot " + std::to_string(k) + " differs"};
            }
          }
        }
      }
      ++patches;
    }
  }
  return {true, "100 triplets, " + std::to_string(patches) + " frame and residual patches bit-exact"};
}

Outcome dimension_law() {
  const std::string video = synthetic_y4m(64, 48, 12, Rational{6, 1});
  std::string detail;
  bool ok = true;
  for (auto [spatial, expect] : {std::pair{1024, 9984}, std::pair{1536, 11520}}) {
    BackendSpec spec;
    spec.spatial_dim = spatial;
    auto backend = make_backend(spec);
    auto source = open_y4m_buffer(video);
    const auto v = extract_video(*source, FragConfig{}, ChunkConfig{}, *backend);
    ok = ok && v.values.size() == static_cast<std::size_t>(expect);
    detail += (detail.empty() ? "" : ", ") + std::string("spatial ") + std::to_string(spatial) + " -> " +
              std::to_string(v.values.size());
  }
  return {ok, detail};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  auto m = make_mlp({8, 256, 128}, 31, 0.0);
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto* t : {&m.params.gamma1, &m.params.gamma2}) for (auto& v : *t) v = 1.0 + u(rng);
  for (auto* t : {&m.params.beta1, &m.params.beta2, &m.params.b1, &m.params.b2}) for (auto& v : *t) v = u(rng);
  m.mode = Mode::train;
  Batch x{16, 8, std::vector<double>(16 * 8)};
  for (auto& v : x.data) v = g(rng);
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < 16; ++r) rows.emplace_back(x.row(r).begin(), x.row(r).end());
  std::vector<double> y(16);
  for (auto& v : y) v = 1.0 + 4.0 * std::uniform_real_distribution<double>(0, 1)(rng);
  const auto cache = forward(m, x, ForwardOptions{nullptr, false});
  const auto lg = composite_loss_grad(cache.pred, y, LossWeights{});
  const auto grads = backward(m, cache, lg.grad);
  const auto res = oracle::finite_difference_check(m, rows, y, 0.6, 1.0, grads, kGradEps, kGradAbsTol, kGradRelTol);
  const double secs = since(t0);
  return {res.failures == 0 && res.checked == m.params.size() && secs < kGradLimitSeconds,
          std::to_string(res.checked) + " parameters, " + std::to_string(res.failures) + " outside tolerance, worst " +
              res.worst_name + " abs " + fmt(res.worst_abs, 3) + ", " + fmt(secs) + "s < " + fmt(kGradLimitSeconds) +
              "s"};
}

Outcome rank_hand_case() {
  const std::vector<double> truth{1.0, 0.0}, pred{0.5, 0.0};
  const double v = rank_loss(pred, truth, 0.0);
  return {v == 0.25, "rank loss = " + fmt(v, 17)};
}

FeatureMatrix synthetic_corpus(std::size_t n) {
  FeatureMatrix x;
  auto backend = make_backend(BackendSpec{});
  for (std::size_t i = 0; i < n; ++i) {
    SynthParams sp;
    sp.seed = 1000 + i;
    sp.speed = 0.25 + 0.5 * static_cast<double>(i % 8);
    sp.noise = 3.0 * static_cast<double>((i * 5) % 9);
    sp.noise_cells = 8 + static_cast<int>((i * 7) % 5) * 8;
    sp.flicker = 4.0 * static_cast<double>((i * 3) % 4);
    auto source = open_y4m_buffer(synthetic_y4m(64, 48, 8, Rational{6, 1}, sp));
    const auto v = extract_video(*source, FragConfig{}, ChunkConfig{}, *backend);
    x.push_row(v.values);
  }
  return x;
}

Outcome overfit_and_null() {
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureMatrix x = synthetic_corpus(64);

  // Scores: a random linear functional of the features, mapped affinely onto [1, 5].
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(x.cols);
  for (auto& v : w) v = g(rng);
  std::vector<double> z(x.rows, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto row = x.row(r);
    for (std::size_t k = 0; k < x.cols; ++k) z[r] += w[k] * row[k];
  }
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  std::vector<double> y(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) y[r] = 1.0 + 4.0 * (z[r] - *lo) / (*hi - *lo);

  TrainConfig cfg;  // lr 1e-2, wd 5e-4, mae_w 0.6, rank_w 1.0, 200 epochs
  cfg.seed = 7;
  const auto fit = train(x, y, cfg);
  const double train_srcc =
      srcc(predict_batch(fit.model, gather(x, fit.split.train)), gather(std::span<const double>(y), fit.split.train));

  // Null control: labels independent of the content; half the corpus held out.
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::vector<double> noise(x.rows);
  for (auto& v : noise) v = u(rng);
  TrainConfig null_cfg = cfg;
  null_cfg.split = 0.5;
  const auto null_fit = train(x, noise, null_cfg);
  const double null_srcc = srcc(predict_batch(null_fit.model, gather(x, null_fit.split.test)),
                                gather(std::span<const double>(noise), null_fit.split.test));
  const double secs = since(t0);
  return {train_srcc >= kOverfitMinSrcc && std::fabs(null_srcc) < kNullMaxAbsSrcc && secs < kOverfitLimitSeconds,
          "train SRCC " + fmt(train_srcc) + " >= " + fmt(kOverfitMinSrcc) + " (selected " + fit.selected +
              "), null val SRCC " + fmt(null_srcc) + " within +-" + fmt(kNullMaxAbsSrcc) + " on " +
              std::to_string(null_fit.split.test.size()) + " held-out, " + fmt(secs, 3) + "s < " +
              fmt(kOverfitLimitSeconds) + "s"};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  std::size_t krcc_exact = 0, vectors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const int levels = 1 + static_cast<int>(rng() % 30);
    std::uniform_int_distribution<int> lv(0, levels);
    std::uniform_real_distribution<double> c(0.0, 5.0);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = trial % 2 ? lv(rng) * 0.25 : c(rng);
    for (auto& v : b) v = lv(rng) * 0.5;
    if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) == a.end() ||
        std::adjacent_find(b.begin(), b.end(), std::not_equal_to<>()) == b.end()) {
      b[0] += 1.0;  // keep both vectors non-constant so every metric is defined
      if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) == a.end()) a[0] += 1.0;
    }
    ++vectors;
    worst = std::max({worst, std::fabs(srcc(a, b) - oracle::spearman(a, b)),
                      std::fabs(plcc(a, b) - oracle::pearson(a, b)), std::fabs(rmse(a, b) - oracle::rmse(a, b))});
    krcc_exact += krcc(a, b) == oracle::kendall(a, b);
  }
  return {worst <= kMetricTol && krcc_exact == vectors,
          std::to_string(vectors) + " vector pairs, max |SRCC/PLCC/RMSE diff| " + fmt(worst, 3) + " <= " +
              fmt(kMetricTol, 3) + ", KRCC exact " + std::to_string(krcc_exact) + "/" + std::to_string(vectors)};
}

std::vector<FragmentTriplet> tagged_triplets(int n) {
  std::vector<FragmentTriplet> out;
  for (int i = 0; i < n; ++i) {
    FragmentTriplet t;
    t.source_index = i + 1;
    t.resized_frame = Image(4, 4, std::vector<std::uint8_t>(48, static_cast<std::uint8_t>(i)));
    t.frag_residual = Image(4, 4, std::vector<std::uint8_t>(48, static_cast<std::uint8_t>(100 + i)));
    t.frag_frame = Image(4, 4, std::vector<std::uint8_t>(48, static_cast<std::uint8_t>(200 - i)));
    out.push_back(std::move(t));
  }
  return out;
}

Outcome chunking() {
  const VideoMeta meta{4, 4, Rational{30, 1}, std::nullopt};
  const ChunkConfig cfg{30, Sampling::all_frames};
  const auto long_run = chunk_triplets(tagged_triplets(45), meta, cfg);
  const auto short_run = chunk_triplets(tagged_triplets(10), meta, cfg);
  bool ok = long_run.size() == 1 && long_run[0].length() == 30 && long_run[0].pad_count == 0 &&
            short_run.size() == 1 && short_run[0].length() == 30 && short_run[0].pad_count == 20;
  if (ok) {
    const auto& c = short_run[0];
    for (std::size_t k = 10; k < 30; ++k) {
      ok = ok && std::ranges::equal(c.resized[k].pixels(), c.resized[9].pixels()) &&
           std::ranges::equal(c.frag_residuals[k].pixels(), c.frag_residuals[9].pixels()) &&
           std::ranges::equal(c.frag_frames[k].pixels(), c.frag_frames[9].pixels());
    }
    ok = ok && c.resized[9].pixels()[0] == 9;
  }
  return {ok, "N'=45 -> " + std::to_string(long_run.size()) + " chunk (pad " +
                  std::to_string(long_run.empty() ? -1 : long_run[0].pad_count) + "), N'=10 -> " +
                  std::to_string(short_run.size()) + " chunk (pad " +
                  std::to_string(short_run.empty() ? -1 : short_run[0].pad_count) +
                  "), padding byte-equal to the last real triplet"};
}

Outcome determinism() {
  testutil::TempDir dir("accept-det");
  std::string videos, labels = "video_id,mos\n";
  for (int i = 0; i < 10; ++i) {
    SynthParams sp;
    sp.seed = static_cast<std::uint64_t>(i);
    sp.speed = 0.5 + i;
    sp.noise = 2.0 * i;
    const auto name = "clip" + std::to_string(i);
    write_synthetic_y4m(dir / (name + ".y4m"), 64, 48, 8, Rational{6, 1}, sp);
    videos += " " + q(dir / (name + ".y4m"));
    labels += name + "," + fmt(1.0 + 0.4 * i) + "\n";
  }
  testutil::spit(dir / "labels.csv", labels);
  for (const char* run : {"a", "b"}) {
    const fs::path out = dir / run;
    fs::create_directories(out);
    const std::string common = " --seed 11 --epochs 30 -q";
    if (run_cli("extract" + videos + " --out " + q(out / "f.dvqf") + " --labels " + q(dir / "labels.csv") + common) != 0 ||
        run_cli("train --features " + q(out / "f.dvqf") + " --out " + q(out / "m.bin") + common) != 0 ||
        run_cli("predict --model " + q(out / "m.bin") + " --features " + q(out / "f.dvqf") + " --out " +
                q(out / "s.csv") + common) != 0) {
      return {false, std::string("pipeline run ") + run + " failed"};
    }
  }
  std::string detail;
  bool ok = true;
  for (const char* f : {"f.dvqf", "m.bin", "s.csv"}) {
    const auto a = testutil::slurp(dir / "a" / f);
    const auto b = testutil::slurp(dir / "b" / f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + std::string(f) + (same ? " identical" : " DIFFERS") + " (" +
              std::to_string(a.size()) + " bytes)";
  }
  return {ok, detail};
}

Outcome bench_shape() {
  testutil::TempDir dir("accept-bench");
  const auto out = dir / "bench.json";
  if (run_cli("bench --resolutions 540p,2160p --frames 9 --fps 8 --repeats 10 --out " + q(out) + " -q") != 0) {
    return {false, "bench command failed"};
  }
  const auto j = nlohmann::json::parse(testutil::slurp(out));
  const auto& rows = j.at("resolutions");
  const auto& lo = rows.at(0).at("mean_seconds");
  const auto& hi = rows.at(1).at("mean_seconds");
  const double extract_ratio = hi.at("extract").get<double>() / lo.at("extract").get<double>();
  const double fragment_ratio = hi.at("fragment").get<double>() / lo.at("fragment").get<double>();
  const bool ok = j.at("repeats") == 10 && extract_ratio >= kBenchExtractLo && extract_ratio <= kBenchExtractHi &&
                  fragment_ratio <= kBenchFragmentMax;
  return {ok, "extract 2160p/540p " + fmt(extract_ratio) + " in [" + fmt(kBenchExtractLo) + ", " +
                  fmt(kBenchExtractHi) + "], fragment 2160p/540p " + fmt(fragment_ratio) + " <= " +
                  fmt(kBenchFragmentMax)};
}

}  // namespace

int main() {
  criterion("top-T count law", top_t_law);
  criterion("fragmentation oracle", fragmentation_oracle);
  criterion("alignment invariant", alignment);
  criterion("dimension law", dimension_law);
  criterion("gradient check", gradient_check);
  criterion("rank-loss hand case", rank_hand_case);
  criterion("overfit sanity and null control", overfit_and_null);
  criterion("metric oracles", metric_oracles);
  criterion("chunking", chunking);
  criterion("determinism", determinism);
  criterion("bench shape", bench_shape);
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
