// fragvqa: command-line front end for fragmenting videos, extracting features, training
// and evaluating the quality regressor, and timing the pipeline.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fragvqa/backend.hpp"
#include "fragvqa/bench.hpp"
#include "fragvqa/checkpoint.hpp"
#include "fragvqa/config.hpp"
#include "fragvqa/evaluation.hpp"
#include "fragvqa/feature_file.hpp"
#include "fragvqa/features.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/frame_io.hpp"
#include "fragvqa/labels.hpp"
#include "fragvqa/synth.hpp"
#include "fragvqa/train.hpp"

namespace fs = std::filesystem;
using namespace fragvqa;

namespace {

bool g_quiet = false;

void note(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// Flags shared by all subcommands. Unset optionals leave the config file / defaults alone.
struct CommonFlags {
  std::string config;
  std::optional<int> patch_size;
  std::optional<int> target_size;
  std::optional<std::string> backend;
  std::optional<std::string> models_dir;
  std::optional<int> spatial_dim;
  std::optional<int> chunk_length;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats;
  std::optional<std::string> sampling;
  std::optional<int> epochs;
};

void add_common(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config, "TOML-style pipeline config")->check(CLI::ExistingFile);
  app.add_option("--patch-size", f.patch_size, "fragment patch size p");
  app.add_option("--target-size", f.target_size, "fragment / backend input size s");
  app.add_option("--backend", f.backend, "feature backend")->check(CLI::IsMember({"toy", "neural"}));
  app.add_option("--models-dir", f.models_dir, "exported model directory (neural backend)");
  app.add_option("--spatial-dim", f.spatial_dim, "spatial branch output dimension");
  app.add_option("--chunk-length", f.chunk_length, "triplets per chunk (0 = one second)");
  app.add_option("--jobs", f.jobs, "videos processed in parallel");
  app.add_option("--seed", f.seed, "training / split seed");
  app.add_option("--repeats", f.repeats, "evaluation or bench repeats");
  app.add_option("--sampling", f.sampling, "frame sampling")->check(CLI::IsMember({"all", "every-other"}));
  app.add_option("--epochs", f.epochs, "training epochs");
}

PipelineConfig build_config(const CommonFlags& f) {
  PipelineConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config);
  if (f.patch_size) cfg.frag.patch_size = *f.patch_size;
  if (f.target_size) cfg.frag.target_size = *f.target_size;
  if (f.backend) cfg.backend.kind = parse_backend_kind(*f.backend);
  if (f.models_dir) cfg.models_dir = *f.models_dir;
  if (cfg.models_dir.empty()) {
    if (const char* env = std::getenv("FRAGVQA_MODELS_DIR")) cfg.models_dir = env;
  }
  if (f.spatial_dim) cfg.backend.spatial_dim = *f.spatial_dim;
  if (f.chunk_length) cfg.chunk.chunk_length = *f.chunk_length;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.seed) cfg.train.seed = *f.seed;
  if (f.repeats) cfg.repeats = *f.repeats;
  if (f.sampling) cfg.chunk.sampling = parse_sampling(*f.sampling);
  if (f.epochs) cfg.train.epochs = *f.epochs;
  resolve(cfg);
  if (cfg.backend.kind == BackendKind::neural_interchange && cfg.models_dir.empty()) {
    throw UsageError("neural backend needs --models-dir or FRAGVQA_MODELS_DIR");
  }
  validate(cfg);
  return cfg;
}

// The neural backend takes its dimensions from the export manifest.
BackendSpec resolved_backend(const PipelineConfig& cfg) {
  if (cfg.backend.kind == BackendKind::neural_interchange) return load_manifest(cfg.models_dir, cfg.backend);
  return cfg.backend;
}

std::string video_id(const fs::path& p) { return p == "-" ? std::string("stdin") : p.stem().string(); }

std::vector<std::string> read_list(const fs::path& list) {
  std::ifstream in(list);
  if (!in) throw IoError("cannot open video list '" + list.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fs::path p(line);
    if (p.is_relative()) p = list.parent_path() / p;
    out.push_back(p.string());
  }
  return out;
}

// Exclusive advisory lock on "<path>.lock" held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const fs::path& target) {
    auto lock = target;
    lock += ".lock";
    fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file '" + lock.string() + "'");
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("cannot lock '" + lock.string() + "'");
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void write_text(const fs::path& path, const std::string& text) {
  FileLock lock(path);
  detail::write_atomically(path, text);
}

std::string fmt_fixed(double v, int prec = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

std::string fmt_exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// --- fragment ---------------------------------------------------------------

struct FragmentArgs {
  std::string video;
  std::string out_dir;
  std::optional<std::int64_t> limit;
};

int cmd_fragment(const PipelineConfig& cfg, const FragmentArgs& a) {
  auto source = open_video(a.video);
  const auto& meta = source->meta();
  const int p = cfg.frag.patch_size;
  const int rows = meta.height / p;
  const int cols = meta.width / p;
  if (rows == 0 || cols == 0) {
    throw FormatError("patch size " + std::to_string(p) + " exceeds the " + std::to_string(meta.width) + "x" +
                      std::to_string(meta.height) + " frame");
  }
  const auto t = top_t_count(cfg.frag.target_size, p);
  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);

  std::int64_t frames = 0;
  std::int64_t triplets = 0;
  nlohmann::json entries = nlohmann::json::array();
  std::optional<Frame> prev = source->next();
  if (prev) frames = 1;
  while (prev) {
    std::optional<Frame> cur = source->next();
    if (!cur) break;
    ++frames;
    if (!a.limit || triplets < *a.limit) {
      const auto trip = fragment_pair(*prev, *cur, cfg.frag);
      char stem[32];
      std::snprintf(stem, sizeof stem, "t%06lld", static_cast<long long>(trip.source_index));
      write_ppm(out / (std::string(stem) + "_resized.ppm"), trip.resized_frame);
      write_ppm(out / (std::string(stem) + "_residual.ppm"), trip.frag_residual);
      write_ppm(out / (std::string(stem) + "_frame.ppm"), trip.frag_frame);
      nlohmann::json coords = nlohmann::json::array();
      for (const auto& c : trip.coords) coords.push_back({c.row, c.col});
      const nlohmann::json cj{{"source_index", trip.source_index}, {"coords", coords}, {"scores", trip.scores}};
      write_text(out / (std::string(stem) + "_coords.json"), cj.dump() + "\n");
      entries.push_back(stem);
    }
    ++triplets;
    prev = std::move(cur);
  }
  const nlohmann::json manifest{{"video", a.video},
                                {"width", meta.width},
                                {"height", meta.height},
                                {"frames", frames},
                                {"triplets", triplets},
                                {"grid", {{"rows", rows}, {"cols", cols}}},
                                {"patch_size", p},
                                {"target_size", cfg.frag.target_size},
                                {"top_t", t},
                                {"dumped", entries}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "frames " << frames << "\ntriplets " << triplets << "\ngrid " << rows << "x" << cols << "\nT " << t
            << "\n";
  return 0;
}

// --- extract ----------------------------------------------------------------

struct ExtractArgs {
  std::vector<std::string> videos;
  std::string list;
  std::string out;
  std::string labels;
};

int cmd_extract(const PipelineConfig& cfg, const ExtractArgs& a) {
  std::vector<std::string> videos = a.videos;
  if (!a.list.empty()) {
    const auto more = read_list(a.list);
    videos.insert(videos.end(), more.begin(), more.end());
  }
  const BackendSpec spec = resolved_backend(cfg);
  const auto dim = static_cast<std::uint32_t>(spec.fused_dim());

  std::map<std::string, double> mos;
  if (!a.labels.empty()) {
    for (const auto& l : load_labels(a.labels)) mos[l.video_id] = l.mos;
  }

  FileLock lock(a.out);
  FeatureSet set;
  set.dim = dim;
  if (fs::exists(a.out) && fs::file_size(a.out) > 0) {
    set = load_features(a.out);
    if (set.records.empty()) set.dim = dim;
    if (set.dim != dim) {
      throw ShapeError("'" + a.out + "' holds " + std::to_string(set.dim) + "-dim features, config produces " +
                       std::to_string(dim));
    }
  }

  std::set<std::string> known;
  for (const auto& r : set.records) known.insert(r.id);
  std::vector<std::string> todo;
  for (const auto& v : videos) {
    const auto id = video_id(v);
    if (!known.insert(id).second) {
      warn("skipping duplicate video id '" + id + "' (" + v + ")");
      continue;
    }
    todo.push_back(v);
  }

  // Workers pull videos in order; results land in their input slot so output order does
  // not depend on scheduling.
  std::vector<std::optional<VideoFeature>> results(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    std::unique_ptr<FeatureBackend> backend;
    try {
      backend = make_backend(spec.kind == BackendKind::neural_interchange ? [&] {
        BackendSpec s = spec;
        s.model_path = cfg.models_dir;
        return s;
      }() : spec);
    } catch (...) {
      for (std::size_t i = next.fetch_add(todo.size()); i < todo.size(); ++i) errors[i] = std::current_exception();
      return;
    }
    for (std::size_t i; (i = next.fetch_add(1)) < todo.size();) {
      try {
        auto source = open_video(todo[i]);
        results[i] = extract_video(*source, cfg.frag, cfg.chunk, *backend);
        std::lock_guard<std::mutex> g(log_mu);
        note("extracted " + todo[i] + " (" + std::to_string(results[i]->chunk_count) + " chunks)");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(todo.size())));
  if (todo.empty()) {
    worker();
  } else if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < todo.size(); ++i) {
    FeatureRecord r;
    r.id = video_id(todo[i]);
    r.values = std::move(results[i]->values);
    r.path = todo[i];
    r.chunk_count = results[i]->chunk_count;
    if (auto it = mos.find(r.id); it != mos.end()) r.mos = it->second;
    set.records.push_back(std::move(r));
  }
  save_features(a.out, set);
  std::cout << "wrote " << set.records.size() << " video(s), dim " << set.dim << " to " << a.out << "\n";
  return 0;
}

// --- train / predict / eval --------------------------------------------------

struct Labelled {
  FeatureMatrix x;
  std::vector<double> y;
  std::vector<std::string> ids;
};

Labelled join_labels(const FeatureSet& set, const std::string& labels_path) {
  std::map<std::string, double> mos;
  if (!labels_path.empty()) {
    for (const auto& l : load_labels(labels_path)) mos[l.video_id] = l.mos;
  }
  Labelled out;
  out.x.cols = set.dim;
  for (const auto& r : set.records) {
    std::optional<double> y = r.mos;
    if (auto it = mos.find(r.id); it != mos.end()) y = it->second;
    if (!y) {
      warn("no label for '" + r.id + "', skipped");
      continue;
    }
    out.x.push_row(r.values);
    out.y.push_back(*y);
    out.ids.push_back(r.id);
  }
  return out;
}

struct TrainArgs {
  std::string features;
  std::string labels;
  std::string out;
  std::string log;
};

int cmd_train(const PipelineConfig& cfg, const TrainArgs& a) {
  const auto set = load_features(a.features);
  const auto data = join_labels(set, a.labels);
  const auto result = train(data.x, data.y, cfg.train);
  CheckpointInfo info{fnv1a(std::to_string(set.dim) + ";seed=" + std::to_string(cfg.train.seed) +
                            ";epochs=" + std::to_string(cfg.train.epochs)),
                      cfg.train.seed, result.selected};
  {
    FileLock lock(a.out);
    save_checkpoint(a.out, result.model, info);
  }
  const std::string log = a.log.empty() ? a.out + ".log.csv" : a.log;
  write_text(log, training_log_csv(result.log));
  std::cout << "trained on " << result.split.train.size() << " video(s), validated on " << result.split.test.size()
            << "\nselected " << result.selected << " (best val RMSE " << fmt_fixed(result.best_val_rmse)
            << " at epoch " << result.best_epoch << ", SWA val RMSE " << fmt_fixed(result.swa_val_rmse) << ")\n";
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string features;
  std::vector<std::string> videos;
  std::string out;
};

int cmd_predict(const PipelineConfig& cfg, const PredictArgs& a) {
  const MlpModel model = load_checkpoint(a.model);
  std::vector<std::pair<std::string, double>> scores;
  auto check_dim = [&](std::size_t d) {
    if (d != static_cast<std::size_t>(model.shape.input)) {
      throw ShapeError("features have dim " + std::to_string(d) + ", model expects " +
                       std::to_string(model.shape.input));
    }
  };
  if (!a.features.empty()) {
    const auto set = load_features(a.features);
    check_dim(set.dim);
    for (const auto& r : set.records) scores.emplace_back(r.id, predict(model, r.values));
  }
  if (!a.videos.empty()) {
    auto backend = make_backend([&] {
      BackendSpec s = resolved_backend(cfg);
      s.model_path = cfg.models_dir;
      return s;
    }());
    for (const auto& v : a.videos) {
      auto source = open_video(v);
      const auto f = extract_video(*source, cfg.frag, cfg.chunk, *backend);
      check_dim(f.dim());
      scores.emplace_back(video_id(v), predict(model, f.values));
    }
  }
  if (a.features.empty() && a.videos.empty()) throw UsageError("predict needs --features or at least one video");
  std::string csv = "video_id,score\n";
  for (const auto& [id, s] : scores) csv += id + "," + fmt_exact(s) + "\n";
  if (a.out.empty() || a.out == "-") {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
    note("wrote " + std::to_string(scores.size()) + " score(s) to " + a.out);
  }
  return 0;
}

struct EvalArgs {
  std::string features;
  std::string labels;
  std::string out;
  std::size_t kfold = 0;
};

nlohmann::json result_json(const EvalResult& r) {
  return {{"srcc", r.srcc}, {"plcc", r.plcc}, {"krcc", r.krcc}, {"rmse", r.rmse}, {"n", r.n}};
}

int cmd_eval(const PipelineConfig& cfg, const EvalArgs& a) {
  const auto set = load_features(a.features);
  const auto data = join_labels(set, a.labels);
  const RepeatedEval ev = a.kfold > 0 ? kfold_eval(data.x, data.y, cfg.train, a.kfold)
                                      : repeated_eval(data.x, data.y, cfg.train, cfg.repeats);
  const std::string dataset = fs::path(a.features).stem().string();
  const auto& m = ev.median;
  std::cout << std::left << std::setw(20) << "Dataset" << std::right << std::setw(9) << "SRCC" << std::setw(9)
            << "PLCC" << std::setw(9) << "KRCC" << std::setw(9) << "RMSE" << "\n"
            << std::left << std::setw(20) << dataset << std::right << std::setw(9) << fmt_fixed(m.srcc)
            << std::setw(9) << fmt_fixed(m.plcc) << std::setw(9) << fmt_fixed(m.krcc) << std::setw(9)
            << fmt_fixed(m.rmse) << "\n"
            << "(median of " << ev.runs.size() << (a.kfold > 0 ? " folds" : " repeats") << ")\n";
  if (!a.out.empty()) {
    std::string csv = "run,srcc,plcc,krcc,rmse,n\n";
    for (const auto& r : ev.runs) {
      csv += std::to_string(r.repeat_index) + "," + fmt_exact(r.srcc) + "," + fmt_exact(r.plcc) + "," +
             fmt_exact(r.krcc) + "," + fmt_exact(r.rmse) + "," + std::to_string(r.n) + "\n";
    }
    csv += "median," + fmt_exact(m.srcc) + "," + fmt_exact(m.plcc) + "," + fmt_exact(m.krcc) + "," +
           fmt_exact(m.rmse) + "," + std::to_string(m.n) + "\n";
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : ev.runs) runs.push_back(result_json(r));
    const nlohmann::json j{{"dataset", dataset}, {"median", result_json(m)}, {"runs", runs}};
    write_text(a.out + ".csv", csv);
    write_text(a.out + ".json", j.dump(2) + "\n");
  }
  return 0;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> videos;
  std::vector<std::string> resolutions{"540p", "2160p"};
  int frames = 9;
  int fps = 8;
  std::string model;
  std::string out;
};

std::pair<int, int> parse_resolution(const std::string& r) {
  static const std::map<std::string, std::pair<int, int>> named{
      {"240p", {426, 240}}, {"360p", {640, 360}},   {"480p", {854, 480}},
      {"540p", {960, 540}}, {"720p", {1280, 720}},  {"1080p", {1920, 1080}},
      {"1440p", {2560, 1440}}, {"2160p", {3840, 2160}}};
  if (auto it = named.find(r); it != named.end()) return it->second;
  const auto x = r.find('x');
  try {
    if (x != std::string::npos) return {std::stoi(r.substr(0, x)), std::stoi(r.substr(x + 1))};
  } catch (const std::exception&) {
  }
  throw UsageError("bad resolution '" + r + "' (use e.g. 540p or 960x540)");
}

int cmd_bench(const PipelineConfig& cfg, const BenchArgs& a, bool repeats_given) {
  std::vector<BenchInput> inputs;
  if (!a.videos.empty()) {
    for (const auto& v : a.videos) {
      if (!fs::exists(v)) throw IoError("video '" + v + "' does not exist");
      inputs.push_back({v, [v] { return open_video(v); }});
    }
  } else {
    if (a.frames < 2) throw UsageError("bench needs at least 2 frames");
    for (const auto& r : a.resolutions) {
      const auto [w, h] = parse_resolution(r);
      auto bytes = std::make_shared<const std::string>(synthetic_y4m(w, h, a.frames, Rational{a.fps, 1}));
      inputs.push_back({r, [bytes] { return open_y4m_buffer(*bytes); }});
    }
  }
  std::optional<MlpModel> model;
  if (!a.model.empty()) model = load_checkpoint(a.model);
  BackendSpec spec = resolved_backend(cfg);
  spec.model_path = cfg.models_dir;
  auto backend = make_backend(spec);
  const std::size_t repeats = repeats_given ? cfg.repeats : kDefaultBenchRepeats;
  const auto report = run_bench(inputs, cfg.frag, cfg.chunk, *backend, repeats, model ? &*model : nullptr);

  std::cout << std::left << std::setw(12) << "resolution" << std::right;
  for (const char* h : {"decode", "fragment", "extract", "predict", "total"}) std::cout << std::setw(11) << h;
  std::cout << "\n";
  for (const auto& r : report.rows) {
    std::cout << std::left << std::setw(12) << r.label << std::right;
    for (double v : {r.mean.decode, r.mean.fragment, r.mean.extract, r.mean.predict, r.mean.end_to_end}) {
      std::cout << std::setw(11) << fmt_fixed(v);
    }
    std::cout << "\n";
  }
  std::cout << "(mean seconds over " << report.repeats << " runs)\n";
  if (!a.out.empty()) write_text(a.out, bench_json(report).dump(2) + "\n");
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"No-reference video quality: fragmentation, feature extraction, regression"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonFlags flags;
  add_common(app, flags);
  app.add_flag("-q,--quiet", g_quiet, "suppress progress messages");

  FragmentArgs fa;
  auto* frag = app.add_subcommand("fragment", "dump fragment triplets of one video");
  frag->add_option("video", fa.video, "input video (.y4m, .rgb with .json sidecar, or - for stdin)")->required();
  frag->add_option("--out", fa.out_dir, "output directory")->required();
  frag->add_option("--limit", fa.limit, "dump at most this many triplets");

  ExtractArgs ea;
  auto* extract = app.add_subcommand("extract", "extract per-video features into a DVQF file");
  extract->add_option("videos", ea.videos, "input videos");
  extract->add_option("--list", ea.list, "file with one video path per line");
  extract->add_option("--out", ea.out, "feature file")->required();
  extract->add_option("--labels", ea.labels, "labels CSV (video_id,mos) recorded in the sidecar");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "train the quality regressor");
  trn->add_option("--features", ta.features, "feature file")->required();
  trn->add_option("--labels", ta.labels, "labels CSV (video_id,mos); defaults to sidecar MOS");
  trn->add_option("--out", ta.out, "checkpoint path")->required();
  trn->add_option("--log", ta.log, "training log CSV (default <out>.log.csv)");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "score videos or feature vectors");
  pred->add_option("--model", pa.model, "checkpoint")->required();
  pred->add_option("--features", pa.features, "feature file");
  pred->add_option("videos", pa.videos, "videos to score directly");
  pred->add_option("--out", pa.out, "scores CSV (default stdout)");

  EvalArgs va;
  auto* evl = app.add_subcommand("eval", "median SRCC/PLCC/KRCC/RMSE over repeated splits");
  evl->add_option("--features", va.features, "feature file")->required();
  evl->add_option("--labels", va.labels, "labels CSV (video_id,mos)");
  evl->add_option("--out", va.out, "write <out>.csv and <out>.json");
  evl->add_option("--kfold", va.kfold, "k-fold cross-validation instead of repeated splits");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "per-stage runtime at several resolutions");
  bench->add_option("videos", ba.videos, "videos to time (default: synthetic content)");
  bench->add_option("--resolutions", ba.resolutions, "synthetic resolutions")->delimiter(',');
  bench->add_option("--frames", ba.frames, "synthetic frame count");
  bench->add_option("--fps", ba.fps, "synthetic frame rate");
  bench->add_option("--model", ba.model, "checkpoint used for the predict stage");
  bench->add_option("--out", ba.out, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const PipelineConfig cfg = build_config(flags);
  if (*frag) return cmd_fragment(cfg, fa);
  if (*extract) return cmd_extract(cfg, ea);
  if (*trn) return cmd_train(cfg, ta);
  if (*pred) return cmd_predict(cfg, pa);
  if (*evl) return cmd_eval(cfg, va);
  if (*bench) return cmd_bench(cfg, ba, flags.repeats.has_value());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fragvqa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
