// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Network checkpoint file, version 1. All integers and floats little-endian.
//
//   offset  size        field
//   0       8           magic "PCFLOWNT"
//   8       4  u32      format version (1)
//   12      4  u32      L, number of layers
//   16      8(L+1) u64  widths d_0 ... d_L
//   then L records of 16 bytes:
//           4  u32      activation tag (0 identity, 1 tanh, 2 relu, 3 leaky_relu)
//           8  f64      leaky slope (0 for other tags)
//           4  u32      learn_bias flag (0 or 1)
//   then for each layer ell = 1..L:
//           8 d_ell d_{ell-1}  f64  weight, row-major
//           8 d_ell            f64  bias
//
// Parameters are always stored as 64-bit floats, whatever the in-memory
// scalar type.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pcflow/network.hpp"

namespace pcflow {

inline constexpr std::array<char, 8> kCheckpointMagic = {'P', 'C', 'F', 'L', 'O', 'W', 'N', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw CheckpointError("checkpoint has trailing bytes");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename Scalar>
std::vector<char> serialize_network(const Network<Scalar>& net) {
  check_network(net);
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.depth()));
  for (auto d : net.dims()) w.u64(static_cast<std::uint64_t>(d));
  for (const auto& layer : net.layers) {
    w.u32(static_cast<std::uint32_t>(layer.activation.kind));
    w.f64(layer.activation.slope);
    w.u32(layer.learn_bias ? 1u : 0u);
  }
  for (const auto& layer : net.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        w.f64(static_cast<double>(layer.weight(r, c)));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(static_cast<double>(layer.bias(r)));
  }
  return w.bytes();
}

template <typename Scalar = double>
Network<Scalar> deserialize_network(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() ||
      std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw CheckpointError("bad checkpoint magic");
  r.skip(kCheckpointMagic.size());
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t depth = r.u32();
  if (depth == 0) throw CheckpointError("checkpoint has zero layers");
  if (r.remaining() / 8 < static_cast<std::size_t>(depth) + 1) throw CheckpointError("checkpoint truncated");
  std::vector<std::uint64_t> dims(depth + 1);
  for (auto& d : dims) {
    d = r.u64();
    if (d == 0 || d > (1ull << 31)) throw CheckpointError("checkpoint has an invalid width");
  }
  Network<Scalar> net;
  net.input_dim = static_cast<Eigen::Index>(dims[0]);
  net.layers.resize(depth);
  for (auto& layer : net.layers) {
    const std::uint32_t tag = r.u32();
    if (tag > static_cast<std::uint32_t>(Activation::Kind::kLeakyReLU))
      throw CheckpointError("unknown activation tag " + std::to_string(tag));
    layer.activation.kind = static_cast<Activation::Kind>(tag);
    layer.activation.slope = r.f64();
    const std::uint32_t flag = r.u32();
    if (flag > 1) throw CheckpointError("invalid learn_bias flag");
    layer.learn_bias = flag == 1;
  }
  for (std::uint32_t ell = 1; ell <= depth; ++ell) {
    const auto rows = static_cast<Eigen::Index>(dims[ell]);
    const auto cols = static_cast<Eigen::Index>(dims[ell - 1]);
    if (r.remaining() / 8 / static_cast<std::size_t>(rows) < static_cast<std::size_t>(cols) + 1)
      throw CheckpointError("checkpoint truncated");
    auto& layer = net.layers[ell - 1];
    layer.weight.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) layer.weight(i, j) = static_cast<Scalar>(r.f64());
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) layer.bias(i) = static_cast<Scalar>(r.f64());
  }
  r.expect_end();
  try {
    check_network(net, /*check_finite=*/true);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid network: ") + e.what());
  }
  return net;
}

template <typename Scalar>
void save_network(const Network<Scalar>& net, const std::string& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

template <typename Scalar = double>
Network<Scalar> load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network<Scalar>(bytes);
}

}  // namespace pcflow
