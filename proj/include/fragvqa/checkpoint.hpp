#pragma once

// Regressor checkpoints: one line of JSON header, then little-endian float32 values of
// every trainable tensor (in MlpParams::tensors() order) followed by the BN running
// statistics (mean1, var1, mean2, var2).

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragvqa/errors.hpp"
#include "fragvqa/feature_file.hpp"
#include "fragvqa/mlp.hpp"
#include "fragvqa/train.hpp"

namespace fragvqa {

struct CheckpointInfo {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string selected;
};

namespace detail {

inline std::vector<const std::vector<double>*> checkpoint_tensors(const MlpModel& m) {
  std::vector<const std::vector<double>*> out;
  for (const auto* t : m.params.tensors()) out.push_back(t);
  out.push_back(&m.bn1.mean);
  out.push_back(&m.bn1.var);
  out.push_back(&m.bn2.mean);
  out.push_back(&m.bn2.var);
  return out;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace detail

inline std::string encode_checkpoint(const MlpModel& m, const CheckpointInfo& info) {
  std::size_t count = 0;
  for (const auto* t : detail::checkpoint_tensors(m)) count += t->size();
  nlohmann::json header{{"format", "fragvqa-mlp"},
                        {"version", 1},
                        {"dims", {m.shape.input, m.shape.hidden1, m.shape.hidden2, 1}},
                        {"dropout", m.dropout_p},
                        {"bn_eps", m.bn_eps},
                        {"config_hash", detail::hex64(info.config_hash)},
                        {"seed", info.seed},
                        {"selected", info.selected},
                        {"value_count", count}};
  std::string out = header.dump() + "\n";
  for (const auto* t : detail::checkpoint_tensors(m)) {
    for (double v : *t) detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

inline MlpModel decode_checkpoint(const std::string& bytes, CheckpointInfo* info = nullptr) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("checkpoint lacks a header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "fragvqa-mlp") throw FormatError("not a regressor checkpoint");
  std::vector<int> dims;
  try {
    dims = header.at("dims").get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("checkpoint header lacks integer dims");
  }
  if (dims.size() != 4 || dims[3] != 1 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw FormatError("unexpected checkpoint dims");
  }
  MlpModel m = make_mlp({dims[0], dims[1], dims[2]}, 0, header.value("dropout", 0.1));
  m.bn_eps = header.value("bn_eps", 1e-5);
  std::size_t pos = nl + 1;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::vector<std::vector<double>*> tensors;
  for (auto* t : m.params.tensors()) tensors.push_back(t);
  tensors.push_back(&m.bn1.mean);
  tensors.push_back(&m.bn1.var);
  tensors.push_back(&m.bn2.mean);
  tensors.push_back(&m.bn2.var);
  for (auto* t : tensors) {
    if (bytes.size() - pos < t->size() * 4) throw FormatError("truncated checkpoint payload");
    for (auto& v : *t) {
      v = detail::get_f32(p + pos);
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes in checkpoint");
  for (const auto* var : {&m.bn1.var, &m.bn2.var}) {
    for (double v : *var) {
      if (!(v > 0.0)) throw FormatError("checkpoint has non-positive running variance");
    }
  }
  if (info) {
    const std::string hash = header.value("config_hash", std::string("0"));
    std::uint64_t h = 0;
    const auto [ptr, ec] = std::from_chars(hash.data(), hash.data() + hash.size(), h, 16);
    if (ec != std::errc{} || ptr != hash.data() + hash.size()) throw FormatError("bad checkpoint config_hash");
    info->config_hash = h;
    info->seed = header.value("seed", std::uint64_t{0});
    info->selected = header.value("selected", std::string{});
  }
  m.mode = Mode::eval;
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const MlpModel& m, const CheckpointInfo& info) {
  detail::write_atomically(path, encode_checkpoint(m, info));
}

inline MlpModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
  return decode_checkpoint(detail::read_all(path), info);
}

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace detail

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,lr,train_loss,val_rmse,val_srcc\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + detail::fmt_double(e.lr) + "," + detail::fmt_double(e.train_loss) + "," +
           detail::fmt_double(e.val_rmse) + "," + detail::fmt_double(e.val_srcc) + "\n";
  }
  return out;
}

}  // namespace fragvqa
