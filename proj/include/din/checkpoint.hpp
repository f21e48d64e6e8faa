#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "din/netspec.hpp"

namespace din {

// Versioned named-tensor container:
//   magic "DINC" | version u32 | count u32 | entries
//   entry: name_len u32 | name | rank u32 | dims u64 x rank | payload f32 LE
// Payloads are stored at 32-bit precision; doubles narrow on write and
// widen exactly on read, so write -> read -> write is a fixed point.
// All integers little-endian.

inline constexpr uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(size_t n) {
    if (pos_ + n > size_) throw checkpoint_error("checkpoint truncated");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace detail

inline void write_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::string out;
  out += "DINC";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) detail::put_u64(out, static_cast<uint64_t>(d));
    for (double v : t.data()) detail::put_f32(out, static_cast<float>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("write to '" + path + "' failed");
}

inline NamedTensors read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::Reader r(reinterpret_cast<const uint8_t*>(blob.data()), blob.size());
  if (r.bytes(4) != "DINC") throw checkpoint_error("'" + path + "' is not a checkpoint (bad magic)");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw checkpoint_error("'" + path + "' has unsupported version " + std::to_string(version));
  const uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    const uint32_t rank = r.u32();
    if (rank > 8) throw checkpoint_error("entry '" + name + "' has implausible rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(r.u64());
      if (shape[d] <= 0) throw checkpoint_error("entry '" + name + "' has non-positive dim");
      numel *= shape[d];
    }
    std::vector<double> values(static_cast<size_t>(numel));
    for (double& v : values) v = static_cast<double>(r.f32());
    out.emplace_back(std::move(name), Tensor::from_vector(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw checkpoint_error("'" + path + "' has trailing bytes");
  return out;
}

// ---------------------------------------------------------------------------
// Exact f64 side-channel. The f32 payload cannot hold a double, so tensors
// that must survive bit-exactly (optimizer state, resume points) are also
// stored as four u16 words per double; every u16 is exactly representable
// in f32, which makes the encoding lossless within the format.
// ---------------------------------------------------------------------------

inline constexpr const char* kExactSuffix = "~f64";

inline Tensor encode_f64_exact(const Tensor& t) {
  Tensor enc = Tensor::zeros({t.numel() * 4});
  auto src = t.data();
  auto dst = enc.mut_data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    const uint64_t bits = std::bit_cast<uint64_t>(src[i]);
    for (int w = 0; w < 4; ++w) dst[i * 4 + w] = static_cast<double>((bits >> (16 * w)) & 0xFFFF);
  }
  return enc;
}

inline Tensor decode_f64_exact(const Tensor& enc, Shape shape) {
  check(enc.numel() == 4 * shape_numel(shape), "exact-encoded payload does not match target shape");
  Tensor out = Tensor::zeros(std::move(shape));
  auto src = enc.data();
  auto dst = out.mut_data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    uint64_t bits = 0;
    for (int w = 0; w < 4; ++w) bits |= static_cast<uint64_t>(static_cast<uint16_t>(src[i * 4 + w])) << (16 * w);
    dst[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline Tensor encode_u64_exact(uint64_t v) {
  Tensor t = Tensor::zeros({4});
  auto d = t.mut_data();
  for (int w = 0; w < 4; ++w) d[w] = static_cast<double>((v >> (16 * w)) & 0xFFFF);
  return t;
}

inline uint64_t decode_u64_exact(const Tensor& t) {
  check(t.numel() == 4, "u64 payload must have 4 words");
  uint64_t v = 0;
  for (int w = 0; w < 4; ++w) v |= static_cast<uint64_t>(static_cast<uint16_t>(t.data()[w])) << (16 * w);
  return v;
}

// ---------------------------------------------------------------------------
// ParamStore round trip
// ---------------------------------------------------------------------------

// exact=true additionally writes the lossless twins, so a later load
// restores the full f64 state (training checkpoints use this).
inline void save_params(const std::string& path, const ParamStore& store, bool exact = false,
                        const NamedTensors& extra = {}) {
  NamedTensors out;
  for (const auto& [name, t] : store.items()) {
    out.emplace_back(name, t);
    if (exact) out.emplace_back(name + kExactSuffix, encode_f64_exact(t));
  }
  for (const auto& e : extra) out.push_back(e);
  write_checkpoint(path, out);
}

// Copies values into the existing tensors (handles stay valid). Every
// store parameter must be present with a matching shape; exact twins are
// preferred when available. Entries outside the store are returned for
// the caller (optimizer state and the like).
inline NamedTensors load_params_into(const std::string& path, ParamStore& store) {
  NamedTensors entries = read_checkpoint(path);
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : entries) by_name[name] = &t;
  for (auto& [name, t] : store.items()) {
    auto exact_it = by_name.find(name + kExactSuffix);
    if (exact_it != by_name.end()) {
      Tensor decoded = decode_f64_exact(*exact_it->second, t.shape());
      std::copy(decoded.data().begin(), decoded.data().end(), t.mut_data().begin());
      continue;
    }
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw checkpoint_error("checkpoint is missing parameter '" + name + "' (architecture mismatch?)");
    if (it->second->shape() != t.shape())
      throw checkpoint_error("parameter '" + name + "' has shape " + shape_str(it->second->shape()) +
                             " in the checkpoint but the model expects " + shape_str(t.shape()));
    std::copy(it->second->data().begin(), it->second->data().end(), t.mut_data().begin());
  }
  NamedTensors rest;
  for (auto& [name, t] : entries) {
    if (store.has(name)) continue;
    const bool is_twin = name.size() > 4 && name.substr(name.size() - 4) == kExactSuffix &&
                         store.has(name.substr(0, name.size() - 4));
    if (!is_twin) rest.emplace_back(name, t);
  }
  return rest;
}

}  // namespace din
