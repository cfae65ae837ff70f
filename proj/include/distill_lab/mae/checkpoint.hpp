#pragma once

// Binary checkpoint of ToyModelParams, little-endian throughout:
//
//   magic   "DLCK" (4 bytes)
//   version u32 = 1
//   mode    u32 (0 token, 1 patch)
//   dims    6 x i64: K, h, ffn, vocab, patch_dim, reserved (0)
//   3 groups in order encoder, decoder, head, each:
//     count u32, then per tensor:
//       name length u32, name bytes, rows i64, cols i64,
//       rows*cols float64 in row-major order
//
// save followed by load reproduces every tensor bitwise.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "distill_lab/error.hpp"
#include "distill_lab/mae/model.hpp"

namespace distill_lab::mae {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'D', 'L', 'C', 'K'};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(in), ErrorCode::IoError, "truncated checkpoint");
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const ToyModelParams& p) {
  out.write(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, p.dims.mode == DataMode::Token ? 0u : 1u);
  for (std::int64_t v : {std::int64_t(p.dims.K), std::int64_t(p.dims.h), std::int64_t(p.dims.ffn),
                         std::int64_t(p.dims.vocab), std::int64_t(p.dims.patch_dim), std::int64_t(0)})
    detail::put<std::int64_t>(out, v);
  for (Group g : kAllGroups) {
    const auto& tensors = p.group(g);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor& t : tensors) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      detail::put<std::int64_t>(out, t.value.rows());
      detail::put<std::int64_t>(out, t.value.cols());
      for (Index i = 0; i < t.value.rows(); ++i)
        for (Index j = 0; j < t.value.cols(); ++j) detail::put<double>(out, t.value(i, j));
    }
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "checkpoint write failed");
}

inline ToyModelParams read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::memcmp(magic, kCheckpointMagic, 4) == 0, ErrorCode::IoError,
          "not a checkpoint (bad magic)");
  const auto version = detail::get<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorCode::IoError, "unsupported checkpoint version " + std::to_string(version));
  ToyModelParams p;
  const auto mode = detail::get<std::uint32_t>(in);
  require(mode <= 1, ErrorCode::IoError, "bad mode field");
  p.dims.mode = mode == 0 ? DataMode::Token : DataMode::Patch;
  p.dims.K = detail::get<std::int64_t>(in);
  p.dims.h = detail::get<std::int64_t>(in);
  p.dims.ffn = detail::get<std::int64_t>(in);
  p.dims.vocab = detail::get<std::int64_t>(in);
  p.dims.patch_dim = detail::get<std::int64_t>(in);
  (void)detail::get<std::int64_t>(in);
  for (Group g : kAllGroups) {
    const auto count = detail::get<std::uint32_t>(in);
    require(count < 4096, ErrorCode::IoError, "implausible tensor count");
    for (std::uint32_t k = 0; k < count; ++k) {
      const auto len = detail::get<std::uint32_t>(in);
      require(len < 4096, ErrorCode::IoError, "implausible tensor name length");
      std::string name(len, '\0');
      in.read(name.data(), len);
      require(static_cast<bool>(in), ErrorCode::IoError, "truncated checkpoint");
      const auto rows = detail::get<std::int64_t>(in);
      const auto cols = detail::get<std::int64_t>(in);
      require(rows >= 0 && cols >= 0 && rows * cols < (std::int64_t{1} << 28), ErrorCode::IoError, "implausible tensor shape");
      Matrix m(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = detail::get<double>(in);
      p.group(g).push_back(Tensor{std::move(name), std::move(m)});
    }
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const ToyModelParams& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_checkpoint(out, p);
}

inline ToyModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open '" + path + "'");
  return read_checkpoint(in);
}

/// FNV-1a over the checkpoint bytes; used to show that pipelines share theta_init.
inline std::uint64_t checksum(const ToyModelParams& p) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, p);
  const std::string bytes = out.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace distill_lab::mae
