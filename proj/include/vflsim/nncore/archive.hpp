/*
 * Copyright 2026 The vflsim Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

// Little-endian append-only byte writer.
class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(std::span<const std::uint8_t> raw) {
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DecodeError("truncated buffer");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kArchiveMagic[8] = {'V', 'F', 'L', 'S', 'I', 'M', 'A', 'R'};
inline constexpr std::uint32_t kArchiveVersion = 1;

// A named, ordered set of tensors plus string metadata. The file layout is
// magic, version, kind, metadata pairs, then each tensor as
// (name, rows u32, cols u32, rows*cols little-endian f64).
struct TensorArchive {
  std::string kind;
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DecodeError("archive is missing tensor '" + name + "'");
    return it->second;
  }

  std::vector<std::uint8_t> encode() const {
    ByteWriter w;
    w.put_raw({reinterpret_cast<const std::uint8_t*>(kArchiveMagic), 8});
    w.put<std::uint32_t>(kArchiveVersion);
    w.put_string(kind);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(metadata.size()));
    for (const auto& [k, v] : metadata) {
      w.put_string(k);
      w.put_string(v);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      w.put_string(name);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols()));
      for (double v : t.values()) w.put<double>(v);
    }
    return w.take();
  }

  static TensorArchive decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    char magic[8];
    for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
    if (std::memcmp(magic, kArchiveMagic, 8) != 0) throw DecodeError("bad archive magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kArchiveVersion) {
      throw DecodeError("unsupported archive version " + std::to_string(version));
    }
    TensorArchive a;
    a.kind = r.get_string();
    const auto n_meta = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
      std::string k = r.get_string();
      a.metadata[k] = r.get_string();
    }
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = r.get_string();
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      r.require(std::size_t{rows} * cols * sizeof(double));
      std::vector<double> values(std::size_t{rows} * cols);
      for (double& v : values) v = r.get<double>();
      a.tensors.emplace(std::move(name), Tensor(rows, cols, std::move(values)));
    }
    if (r.remaining() != 0) throw DecodeError("trailing bytes after archive");
    return a;
  }

  void save(const std::string& path) const {
    const auto bytes = encode();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  static TensorArchive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes);
  }
};

}  // namespace vflsim
