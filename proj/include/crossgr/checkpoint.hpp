#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossgr/hash.hpp"
#include "crossgr/tape.hpp"

#include "json.hpp"

namespace crossgr {

struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sidecar metadata written next to the binary blob. The vocab digest is what
// lets a checkpoint refuse to load against a different dataset.
struct CheckpointMeta {
  std::string model_kind;
  std::string vocab_digest;
  std::uint64_t seed = 0;
  nlohmann::json config;  // model + training configuration snapshot
};

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    write_u64(out, bits);
  }
}
inline void read_doubles(std::istream& in, std::vector<double>& v) {
  for (double& x : v) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&x, &bits, sizeof(bits));
  }
}

constexpr char kMagic[8] = {'C', 'G', 'R', 'C', 'K', 'P', 'T', '1'};

}  // namespace detail

// Binary layout (little-endian): magic, format version, Adam step counter,
// then per parameter: name, shape, raw value/moment doubles. Doubles are
// stored bit-for-bit, so a round trip is exact.
inline void save_checkpoint(const std::string& path, const ParamStore& store,
                            const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(detail::kMagic, sizeof(detail::kMagic));
  detail::write_u32(out, 1);  // format version
  detail::write_u64(out, static_cast<std::uint64_t>(store.step_count()));
  detail::write_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const Param& p : store) {
    detail::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(p.value.rows));
    detail::write_u32(out, static_cast<std::uint32_t>(p.value.cols));
    detail::write_doubles(out, p.value.values);
    detail::write_doubles(out, p.adam_m.values);
    detail::write_doubles(out, p.adam_v.values);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);

  nlohmann::json j;
  j["format_version"] = 1;
  j["model_kind"] = meta.model_kind;
  j["vocab_digest"] = meta.vocab_digest;
  j["seed"] = meta.seed;
  j["config"] = meta.config;
  std::ofstream side(path + ".meta.json");
  if (!side) throw std::runtime_error("save_checkpoint: cannot open " + path + ".meta.json");
  side << j.dump(2) << '\n';
}

inline ParamStore load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1)
    throw std::runtime_error("load_checkpoint: unsupported format version " +
                             std::to_string(version));
  const std::uint64_t step = detail::read_u64(in);
  const std::uint32_t count = detail::read_u32(in);

  ParamStore store;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = detail::read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int rows = static_cast<int>(detail::read_u32(in));
    const int cols = static_cast<int>(detail::read_u32(in));
    Param& p = store.add(name, Matrix(rows, cols));
    detail::read_doubles(in, p.value.values);
    detail::read_doubles(in, p.adam_m.values);
    detail::read_doubles(in, p.adam_v.values);
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  }
  store.set_step_count(static_cast<long long>(step));

  if (meta != nullptr) {
    std::ifstream side(path + ".meta.json");
    if (!side)
      throw std::runtime_error("load_checkpoint: missing sidecar " + path + ".meta.json");
    nlohmann::json j = nlohmann::json::parse(side);
    meta->model_kind = j.value("model_kind", "");
    meta->vocab_digest = j.value("vocab_digest", "");
    meta->seed = j.value("seed", std::uint64_t{0});
    meta->config = j.value("config", nlohmann::json::object());
  }
  return store;
}

// Loader-side guard: a checkpoint only applies to the vocabulary it was
// trained on.
inline void require_matching_vocab(const CheckpointMeta& meta,
                                   const std::string& vocab_digest,
                                   const std::string& checkpoint_path) {
  if (meta.vocab_digest != vocab_digest)
    throw CheckpointMismatch("checkpoint/data mismatch: " + checkpoint_path +
                             " was trained on vocab " + meta.vocab_digest +
                             ", current data has vocab " + vocab_digest);
}

}  // namespace crossgr
