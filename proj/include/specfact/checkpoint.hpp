// specfact/checkpoint.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat binary container for named f64 tensors.
//
//   magic "FCTM" | version u32 | records...
//   record: name_len u32 | name bytes | rank u32 | dims u64[rank] | f64 data
//
// All integers and doubles little-endian. Round-trips are bit-exact.

#ifndef SPECFACT_CHECKPOINT_HPP
#define SPECFACT_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "specfact/common.hpp"
#include "specfact/tensor.hpp"

namespace specfact {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'F', 'C', 'T', 'M'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw_validation("checkpoint: truncated file while reading ", what);
  return v;
}

}  // namespace detail

inline void save_tensors(const std::map<std::string, Tensor>& tensors,
                         const std::filesystem::path& path) {
  // Atomic: write to a temp file in the same directory, then rename.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw_validation("checkpoint: cannot open '", tmp.string(), "' for writing");
    os.write(kCheckpointMagic, 4);
    detail::write_pod<uint32_t>(os, kCheckpointVersion);
    for (const auto& [name, t] : tensors) {
      detail::write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::write_pod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
      for (int64_t d : t.shape()) detail::write_pod<uint64_t>(os, static_cast<uint64_t>(d));
      os.write(reinterpret_cast<const char*>(t.data().data()),
               static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(double))));
    }
    if (!os) throw_validation("checkpoint: write failed for '", tmp.string(), "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::map<std::string, Tensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_validation("checkpoint: cannot open '", path.string(), "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw_validation("checkpoint: bad magic in '", path.string(), "'");
  }
  uint32_t version = detail::read_pod<uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw_validation("checkpoint: unsupported version ", version, " in '", path.string(), "'");
  }
  std::map<std::string, Tensor> out;
  while (true) {
    uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (is.eof()) break;
    if (!is) throw_validation("checkpoint: truncated record header in '", path.string(), "'");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rank = detail::read_pod<uint32_t>(is, "rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(detail::read_pod<uint64_t>(is, "dim"));
      numel *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * static_cast<int64_t>(sizeof(double))));
    if (!is) throw_validation("checkpoint: truncated payload for '", name, "'");
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

// Strings ride in the same container as byte-per-element tensors, so the
// format stays a single record type.
inline Tensor string_to_tensor(const std::string& s) {
  if (s.empty()) return Tensor({1}, {-1.0});
  std::vector<double> data(s.size());
  for (size_t i = 0; i < s.size(); ++i) data[i] = static_cast<double>(static_cast<uint8_t>(s[i]));
  return Tensor({static_cast<int64_t>(s.size())}, std::move(data));
}

inline std::string tensor_to_string(const Tensor& t) {
  if (t.numel() == 1 && t[0] < 0.0) return "";
  std::string s(static_cast<size_t>(t.numel()), '\0');
  for (int64_t i = 0; i < t.numel(); ++i) s[static_cast<size_t>(i)] = static_cast<char>(t[i]);
  return s;
}

}  // namespace specfact

#endif  // SPECFACT_CHECKPOINT_HPP
