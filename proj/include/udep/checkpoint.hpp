#pragma once

// Checkpoint files. Tensor data goes into a little-endian binary file
// (magic, version, tensor count, then name/shape/float64 payload per
// tensor); model config, vocab, transfer lineage, and seed go into a JSON
// sidecar next to it ("<file>.meta.json"). Loading reproduces parameters
// bit-exactly.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "udep/embeddings.hpp"
#include "udep/errors.hpp"
#include "udep/model.hpp"
#include "udep/optim.hpp"

namespace udep {

struct LineageEntry {
  std::string language;
  double best_dev_uas = 0;
  int epoch = 0;  // epoch that produced the kept parameters
};

struct Checkpoint {
  ParamStore params;
  ModelConfig config;
  Vocab vocab;
  std::vector<LineageEntry> lineage;
  std::uint64_t seed = 0;
};

namespace detail_ckpt {

constexpr char kMagic[8] = {'U', 'D', 'E', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  Reader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;

  void need(std::size_t n) {
    if (pos_ + n > data_.size()) throw CheckpointError(what_ + ": truncated file");
  }
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {
      {"word_dim", c.word_dim},           {"pos_dim", c.pos_dim},
      {"d_model", c.d_model},             {"num_layers", c.num_layers},
      {"num_heads", c.num_heads},         {"ffn_dim", c.ffn_dim},
      {"arc_mlp_dim", c.arc_mlp_dim},     {"label_mlp_dim", c.label_mlp_dim},
      {"dropout", c.dropout_p},           {"rel_pos_clip", c.rel_pos_clip},
      {"num_labels", c.num_labels},       {"num_upos", c.num_upos},
  };
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.word_dim = j.at("word_dim");
  c.pos_dim = j.at("pos_dim");
  c.d_model = j.at("d_model");
  c.num_layers = j.at("num_layers");
  c.num_heads = j.at("num_heads");
  c.ffn_dim = j.at("ffn_dim");
  c.arc_mlp_dim = j.at("arc_mlp_dim");
  c.label_mlp_dim = j.at("label_mlp_dim");
  c.dropout_p = j.at("dropout");
  c.rel_pos_clip = j.at("rel_pos_clip");
  c.num_labels = j.at("num_labels");
  c.num_upos = j.at("num_upos");
  return c;
}

inline nlohmann::json vocab_to_json(const Vocab& v) {
  return {{"upos", v.upos_names}, {"labels", v.label_names}};
}

inline Vocab vocab_from_json(const nlohmann::json& j) {
  Vocab v;
  v.upos_names = j.at("upos").get<std::vector<std::string>>();
  v.label_names = j.at("labels").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < v.upos_names.size(); ++i) v.upos_index[v.upos_names[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < v.label_names.size(); ++i) v.label_index[v.label_names[i]] = static_cast<int>(i);
  if (v.upos_names.empty() || v.upos_names[0] != Vocab::kRootTag)
    throw CheckpointError("vocab metadata is missing the reserved ROOT tag");
  return v;
}

}  // namespace detail_ckpt

inline std::filesystem::path checkpoint_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  using namespace detail_ckpt;
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, 2);
    put_u64(out, static_cast<std::uint64_t>(t.rows));
    put_u64(out, static_cast<std::uint64_t>(t.cols));
    for (double x : t.v) put_f64(out, x);
  }
  write_text_file(path, out);

  nlohmann::json meta;
  meta["model"] = config_to_json(ckpt.config);
  meta["vocab"] = vocab_to_json(ckpt.vocab);
  meta["seed"] = ckpt.seed;
  nlohmann::json lin = nlohmann::json::array();
  for (const auto& e : ckpt.lineage)
    lin.push_back({{"language", e.language}, {"best_dev_uas", e.best_dev_uas}, {"epoch", e.epoch}});
  meta["lineage"] = lin;
  write_text_file(checkpoint_sidecar_path(path), meta.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  using namespace detail_ckpt;
  std::string raw;
  try {
    raw = read_text_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  Reader r(std::move(raw), path.string());
  if (r.bytes(8) != std::string(kMagic, sizeof(kMagic)))
    throw CheckpointError(path.string() + ": not a checkpoint file (bad magic)");
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    std::uint32_t ndim = r.u32();
    if (ndim != 2) throw CheckpointError(path.string() + ": tensor '" + name + "' has unsupported rank");
    auto rows = static_cast<int>(r.u64());
    auto cols = static_cast<int>(r.u64());
    ad::Tensor t(rows, cols);
    for (auto& x : t.v) x = r.f64();
    t.requires_grad = true;
    ckpt.params.emplace(std::move(name), std::move(t));
  }
  if (!r.exhausted()) throw CheckpointError(path.string() + ": trailing bytes after tensor data");

  std::string meta_raw;
  try {
    meta_raw = read_text_file(checkpoint_sidecar_path(path));
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_raw);
    ckpt.config = config_from_json(meta.at("model"));
    ckpt.vocab = vocab_from_json(meta.at("vocab"));
    ckpt.seed = meta.at("seed");
    for (const auto& e : meta.at("lineage"))
      ckpt.lineage.push_back({e.at("language"), e.at("best_dev_uas"), e.at("epoch")});
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(checkpoint_sidecar_path(path).string() + ": bad metadata: " + e.what());
  }
  return ckpt;
}

}  // namespace udep
