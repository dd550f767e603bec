#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmfn/config.hpp"
#include "lmfn/model.hpp"
#include "lmfn/optim.hpp"

namespace lmfn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'L', 'M', 'F', 'N'};

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct OptimizerSnapshot {
  std::uint64_t step = 0;
  double lr = 0.0;
  AdamConfig adam{};
  std::vector<Tensor> first_moments;
  std::vector<Tensor> second_moments;
};

/// Model parameters by name, the config that shapes them, and optionally Adam state.
///
/// Layout, all integers little-endian:
///   "LMFN" | u32 version | u32 len, config JSON | u32 count |
///   count × (u32 len, name | 4 × u32 dims | f32 payload) |
///   u8 has_optimizer [ u64 step | f64 lr, beta1, beta2, epsilon, weight_decay |
///                      count × (f32 m payload, f32 v payload) ] |
///   u32 CRC-32 of every preceding byte
struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
  std::optional<OptimizerSnapshot> optimizer;

  std::size_t total_param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.value.numel();
    return n;
  }
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void floats(std::span<const float> vs) {
    for (float v : vs) u32(std::bit_cast<std::uint32_t>(v));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void floats(std::span<float> out) {
    need(out.size() * 4);
    for (float& v : out) v = std::bit_cast<float>(u32());
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated payload");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  for (char c : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.str(nlohmann::json(ck.config).dump());
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    w.str(t.name);
    const Shape s = t.value.shape();
    w.u32(static_cast<std::uint32_t>(s.n));
    w.u32(static_cast<std::uint32_t>(s.c));
    w.u32(static_cast<std::uint32_t>(s.h));
    w.u32(static_cast<std::uint32_t>(s.w));
    w.floats(t.value.data());
  }
  w.u8(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    const OptimizerSnapshot& o = *ck.optimizer;
    if (o.first_moments.size() != ck.tensors.size() ||
        o.second_moments.size() != ck.tensors.size()) {
      throw CheckpointError("checkpoint: optimizer moments do not match tensor count");
    }
    w.u64(o.step);
    w.f64(o.lr);
    w.f64(o.adam.beta1);
    w.f64(o.adam.beta2);
    w.f64(o.adam.epsilon);
    w.f64(o.adam.weight_decay);
    for (std::size_t k = 0; k < ck.tensors.size(); ++k) {
      w.floats(o.first_moments[k].data());
      w.floats(o.second_moments[k].data());
    }
  }
  const std::uint32_t crc = detail::crc32_of(w.bytes());
  w.u32(crc);
  return w.take();
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 4) throw CheckpointError("checkpoint: file too short");
  const auto body = bytes.first(bytes.size() - 4);
  detail::ByteReader tail(bytes.last(4));
  if (detail::crc32_of(body) != tail.u32()) {
    throw CheckpointError("checkpoint: checksum mismatch (file is corrupted)");
  }
  detail::ByteReader r(body);
  for (char c : kCheckpointMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw CheckpointError("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  try {
    ck.config = nlohmann::json::parse(r.str()).get<ModelConfig>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: invalid config snapshot: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = r.str();
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    if (!s.valid()) throw CheckpointError("checkpoint: invalid shape for " + t.name);
    t.value = Tensor(s);
    r.floats(t.value.data());
    ck.tensors.push_back(std::move(t));
  }
  if (r.u8() != 0) {
    OptimizerSnapshot o;
    o.step = r.u64();
    o.lr = r.f64();
    o.adam.beta1 = r.f64();
    o.adam.beta2 = r.f64();
    o.adam.epsilon = r.f64();
    o.adam.weight_decay = r.f64();
    for (const auto& t : ck.tensors) {
      Tensor m(t.value.shape()), v(t.value.shape());
      r.floats(m.data());
      r.floats(v.data());
      o.first_moments.push_back(std::move(m));
      o.second_moments.push_back(std::move(v));
    }
    ck.optimizer = std::move(o);
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes before checksum");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

/// Snapshot of a model's parameters, with optimizer state when given.
inline Checkpoint make_checkpoint(const LmfnModel& model, const Adam* adam = nullptr,
                                  double lr = 0.0) {
  Checkpoint ck;
  ck.config = model.config();
  for (const auto& p : model.params()) ck.tensors.push_back({p->name, p->value});
  if (adam != nullptr) {
    ck.optimizer = OptimizerSnapshot{adam->step_count(), lr, adam->config(),
                                     adam->first_moments(), adam->second_moments()};
  }
  return ck;
}

/// Copies checkpoint tensors into a model of the same architecture.
inline void restore_parameters(LmfnModel& model, const Checkpoint& ck) {
  ParamStore& ps = model.params();
  if (ck.tensors.size() != ps.size()) {
    throw CheckpointError("checkpoint: holds " + std::to_string(ck.tensors.size()) +
                          " tensors, model has " + std::to_string(ps.size()));
  }
  for (const auto& t : ck.tensors) {
    Parameter* p = ps.find(t.name);
    if (p == nullptr) throw CheckpointError("checkpoint: unknown parameter '" + t.name + "'");
    if (p->value.shape() != t.value.shape()) {
      throw CheckpointError("checkpoint: shape mismatch for '" + t.name + "': " +
                            t.value.shape().str() + " vs model " + p->value.shape().str());
    }
    p->value = t.value;
  }
}

inline LmfnModel model_from_checkpoint(const Checkpoint& ck) {
  LmfnModel model = LmfnModel::build(ck.config);
  restore_parameters(model, ck);
  return model;
}

}  // namespace lmfn
