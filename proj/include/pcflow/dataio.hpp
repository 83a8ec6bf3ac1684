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

// Datasets: IDX image/label files, synthetic Gaussian blobs, one-hot
// encoding and seeded minibatching.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcflow/error.hpp"
#include "pcflow/network.hpp"

namespace pcflow {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

template <typename Scalar>
struct Dataset {
  Matrix<Scalar> inputs;  // N x d
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }

  /// First `n` samples (all when n exceeds the size).
  Dataset head(Eigen::Index n) const {
    n = std::min(n, size());
    return {inputs.topRows(n), std::vector<int>(labels.begin(), labels.begin() + n), num_classes};
  }
};

namespace detail {

inline std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxIoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Parsed IDX images: count x rows x cols unsigned bytes.
struct IdxImages {
  std::uint32_t count = 0, rows = 0, cols = 0;
  std::vector<unsigned char> pixels;
};

inline IdxImages parse_idx_images(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4) throw IdxTruncatedError("image file shorter than its magic number");
  if (const auto magic = detail::read_be32(bytes, 0); magic != kIdxImagesMagic)
    throw IdxMagicError("image file magic is " + std::to_string(magic) + ", expected 2051");
  if (bytes.size() < 16) throw IdxTruncatedError("image file header truncated");
  IdxImages out;
  out.count = detail::read_be32(bytes, 4);
  out.rows = detail::read_be32(bytes, 8);
  out.cols = detail::read_be32(bytes, 12);
  if (out.rows == 0 || out.cols == 0) throw IdxDimensionError("image file has a zero dimension");
  const std::uint64_t per_image = std::uint64_t{out.rows} * out.cols;
  const std::uint64_t available = bytes.size() - 16;
  // Division avoids overflowing count * per_image.
  if (out.count > available / per_image)
    throw IdxTruncatedError("image file holds " + std::to_string(available) + " pixel bytes, header declares " +
                            std::to_string(out.count) + " images of " + std::to_string(per_image));
  const std::uint64_t payload = std::uint64_t{out.count} * per_image;
  if (available > payload)
    throw IdxTrailingDataError("image file has " + std::to_string(available - payload) + " trailing bytes");
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

inline std::vector<int> parse_idx_labels(std::span<const unsigned char> bytes, int num_classes) {
  if (bytes.size() < 4) throw IdxTruncatedError("label file shorter than its magic number");
  if (const auto magic = detail::read_be32(bytes, 0); magic != kIdxLabelsMagic)
    throw IdxMagicError("label file magic is " + std::to_string(magic) + ", expected 2049");
  if (bytes.size() < 8) throw IdxTruncatedError("label file header truncated");
  const std::uint64_t count = detail::read_be32(bytes, 4);
  const std::uint64_t available = bytes.size() - 8;
  if (available < count)
    throw IdxTruncatedError("label file holds " + std::to_string(available) + " labels, header declares " +
                            std::to_string(count));
  if (available > count)
    throw IdxTrailingDataError("label file has " + std::to_string(available - count) + " trailing bytes");
  std::vector<int> labels(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= num_classes)
      throw IdxLabelError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                          " is outside [0, " + std::to_string(num_classes) + ")");
  return labels;
}

/// Combines parsed image and label bytes; pixels are divided by 255.
template <typename Scalar = double>
Dataset<Scalar> idx_dataset(std::span<const unsigned char> image_bytes,
                            std::span<const unsigned char> label_bytes, int num_classes = 10) {
  const IdxImages images = parse_idx_images(image_bytes);
  std::vector<int> labels = parse_idx_labels(label_bytes, num_classes);
  if (labels.size() != images.count)
    throw IdxCountMismatchError("image file has " + std::to_string(images.count) +
                                " entries, label file has " + std::to_string(labels.size()));
  const Eigen::Index n = images.count;
  const Eigen::Index d = static_cast<Eigen::Index>(images.rows) * images.cols;
  Dataset<Scalar> out;
  out.inputs.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      out.inputs(i, j) = static_cast<Scalar>(images.pixels[static_cast<std::size_t>(i * d + j)]) /
                         Scalar(255);
  out.labels = std::move(labels);
  out.num_classes = num_classes;
  return out;
}

template <typename Scalar = double>
Dataset<Scalar> load_idx(const std::string& images_path, const std::string& labels_path,
                         int num_classes = 10) {
  const auto images = detail::read_file(images_path);
  const auto labels = detail::read_file(labels_path);
  return idx_dataset<Scalar>(images, labels, num_classes);
}

/// Gaussian blobs: class k has mean e_k (unit vectors, so means are sqrt(2)
/// apart) and isotropic noise of std `noise`. Needs d >= classes.
template <typename Scalar = double>
Dataset<Scalar> synthetic_classification(Eigen::Index n, Eigen::Index d, int classes, RngSeed seed,
                                         double noise = 0.1) {
  if (classes < 1 || d < 1) throw InvalidDimensionError("synthetic_classification: empty shape");
  if (n < classes) throw InvalidArgumentError("synthetic_classification: need n >= classes");
  if (d < classes) throw InvalidArgumentError("synthetic_classification: need d >= classes");
  std::mt19937_64 rng(seed.value);
  std::normal_distribution<double> gauss(0.0, noise);
  Dataset<Scalar> out;
  out.inputs.resize(n, d);
  out.labels.resize(static_cast<std::size_t>(n));
  out.num_classes = classes;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    out.labels[static_cast<std::size_t>(i)] = label;
    for (Eigen::Index j = 0; j < d; ++j)
      out.inputs(i, j) = static_cast<Scalar>((j == label ? 1.0 : 0.0) + gauss(rng));
  }
  return out;
}

template <typename Scalar = double>
Matrix<Scalar> one_hot(std::span<const int> labels, int num_classes) {
  Matrix<Scalar> out = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw InvalidArgumentError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    out(static_cast<Eigen::Index>(i), labels[i]) = Scalar(1);
  }
  return out;
}

struct BatchPlan {
  Eigen::Index batch_size = 64;
  RngSeed seed{0};
  bool drop_last = true;
};

template <typename Scalar>
struct Batch {
  Matrix<Scalar> x;
  Matrix<Scalar> y;  // one-hot
  std::vector<std::size_t> indices;
};

/// Fisher-Yates shuffled sample order for a plan.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, RngSeed seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed.value);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

/// Shuffled fixed-size batches; a short remainder is kept unless drop_last.
template <typename Scalar>
std::vector<Batch<Scalar>> batches(const Dataset<Scalar>& data, const BatchPlan& plan) {
  if (plan.batch_size < 1) throw InvalidArgumentError("batches: batch_size must be >= 1");
  const auto order = shuffled_indices(static_cast<std::size_t>(data.size()), plan.seed);
  const auto bs = static_cast<std::size_t>(plan.batch_size);
  std::vector<Batch<Scalar>> out;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t len = std::min(bs, order.size() - start);
    if (len < bs && plan.drop_last) break;
    Batch<Scalar> b;
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + len));
    b.x.resize(static_cast<Eigen::Index>(len), data.dim());
    std::vector<int> labels(len);
    for (std::size_t r = 0; r < len; ++r) {
      b.x.row(static_cast<Eigen::Index>(r)) = data.inputs.row(static_cast<Eigen::Index>(b.indices[r]));
      labels[r] = data.labels[b.indices[r]];
    }
    b.y = one_hot<Scalar>(labels, data.num_classes);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace pcflow
