// SPDX-License-Identifier: Apache-2.0
// Dataset loading (synthetic blobs, MNIST IDX, CSV, CIFAR binary) and
// horizontal/vertical partitioning into per-client shards.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "splitnn/error.hpp"
#include "splitnn/rng.hpp"
#include "splitnn/tensor.hpp"

namespace splitnn {

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  Tensor features;                   // [N, D] or [N, C, H, W]
  std::vector<std::uint16_t> labels; // one per row
  std::uint32_t num_classes = 0;

  std::uint32_t size() const { return features.shape.empty() ? 0 : features.shape[0]; }

  // Shape of one sample (feature dims without the leading N).
  Shape sample_shape() const {
    if (features.rank() < 2) throw ShapeError("dataset features need rank >= 2");
    return Shape(features.shape.begin() + 1, features.shape.end());
  }

  // Flattened per-sample feature count.
  std::uint32_t feature_count() const { return shape_numel(sample_shape()); }
};

inline void check_dataset(const Dataset& ds, const char* what) {
  if (ds.size() == 0) throw DataError(std::string(what) + ": empty dataset");
  if (ds.labels.size() != ds.size())
    throw DataError(std::string(what) + ": " + std::to_string(ds.size()) + " rows but " +
                    std::to_string(ds.labels.size()) + " labels");
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i] >= ds.num_classes)
      throw DataError(std::string(what) + ": label " + std::to_string(ds.labels[i]) +
                      " at row " + std::to_string(i) + " out of range (classes=" +
                      std::to_string(ds.num_classes) + ")");
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian class blobs: class c is centered 3.0 along axis c % dims,
// labels cycle 0,1,...,classes-1 so every class is evenly represented.

inline Dataset synthetic_blobs(std::uint32_t n, std::uint32_t dims, std::uint32_t classes,
                               std::uint64_t seed) {
  if (n == 0 || dims == 0 || classes == 0)
    throw DataError("synthetic_blobs: n, dims and classes must be positive");
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = classes;
  ds.features = Tensor::zeros({n, dims});
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t c = i % classes;
    ds.labels[i] = static_cast<std::uint16_t>(c);
    for (std::uint32_t d = 0; d < dims; ++d) {
      float mean = (d == c % dims) ? 3.0f : 0.0f;
      ds.features.data[static_cast<std::size_t>(i) * dims + d] =
          mean + static_cast<float>(rng.normal());
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// MNIST IDX (big-endian): 0x00000803 = ubyte images with 3 dims, 0x00000801 =
// ubyte labels with 1 dim. Pixels are scaled to [0,1].

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off,
                               const std::string& path) {
  if (off + 4 > buf.size())
    throw DataError(path + ": truncated at offset " + std::to_string(off));
  return (static_cast<std::uint32_t>(buf[off]) << 24) |
         (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
         static_cast<std::uint32_t>(buf[off + 3]);
}

}  // namespace detail

inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = detail::read_file(images_path);
  auto lab = detail::read_file(labels_path);

  std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u)
    throw DataError(images_path + ": bad magic 0x" + [&] {
      char b[16];
      std::snprintf(b, sizeof b, "%08x", img_magic);
      return std::string(b);
    }() + " at offset 0 (want 0x00000803)");
  std::uint32_t n = detail::read_be32(img, 4, images_path);
  std::uint32_t h = detail::read_be32(img, 8, images_path);
  std::uint32_t w = detail::read_be32(img, 12, images_path);
  std::size_t need = 16 + static_cast<std::size_t>(n) * h * w;
  if (img.size() != need)
    throw DataError(images_path + ": expected " + std::to_string(need) + " bytes, got " +
                    std::to_string(img.size()));

  std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u)
    throw DataError(labels_path + ": bad magic 0x" + [&] {
      char b[16];
      std::snprintf(b, sizeof b, "%08x", lab_magic);
      return std::string(b);
    }() + " at offset 0 (want 0x00000801)");
  std::uint32_t ln = detail::read_be32(lab, 4, labels_path);
  if (lab.size() != 8 + static_cast<std::size_t>(ln))
    throw DataError(labels_path + ": expected " + std::to_string(8 + ln) + " bytes, got " +
                    std::to_string(lab.size()));
  if (ln != n)
    throw DataError(images_path + " has " + std::to_string(n) + " images but " + labels_path +
                    " has " + std::to_string(ln) + " labels");
  if (n == 0) throw DataError(images_path + ": no images");

  Dataset ds;
  ds.features = Tensor::zeros({n, 1, h, w});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * h * w; ++i)
    ds.features.data[i] = static_cast<float>(img[16 + i]) / 255.0f;
  std::uint16_t max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = static_cast<std::uint32_t>(max_label) + 1;
  return ds;
}

// ---------------------------------------------------------------------------
// CSV: every column but the last is a float feature, the last is an integer
// class label. Errors carry 1-based line numbers.

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<float> feats;
  std::vector<std::uint16_t> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() < 2)
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw DataError(path + " line " + std::to_string(line_no) + ": " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
      const std::string& cell = cells[i];
      char* end = nullptr;
      float v = std::strtof(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError(path + " line " + std::to_string(line_no) + ": non-numeric cell '" +
                        cell + "' in column " + std::to_string(i + 1));
      feats.push_back(v);
    }
    const std::string& lc = cells.back();
    unsigned long lv = 0;
    auto [p, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), lv);
    if (ec != std::errc() || p != lc.data() + lc.size() || lv > 0xFFFF)
      throw DataError(path + " line " + std::to_string(line_no) + ": non-numeric label '" + lc +
                      "'");
    labels.push_back(static_cast<std::uint16_t>(lv));
  }
  if (labels.empty()) throw DataError(path + ": no data rows");
  Dataset ds;
  std::uint32_t n = static_cast<std::uint32_t>(labels.size());
  std::uint32_t d = static_cast<std::uint32_t>(width - 1);
  ds.features = Tensor({n, d}, std::move(feats));
  ds.labels = std::move(labels);
  ds.num_classes = static_cast<std::uint32_t>(
                       *std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
  return ds;
}

// ---------------------------------------------------------------------------
// CIFAR binary: each record is 1 label byte followed by 3072 pixel bytes
// (3 channels x 32 x 32), scaled to [0,1].

inline Dataset load_cifar_bin(const std::string& path) {
  auto buf = detail::read_file(path);
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  if (buf.empty() || buf.size() % kRecord != 0)
    throw DataError(path + ": size " + std::to_string(buf.size()) +
                    " is not a multiple of the " + std::to_string(kRecord) +
                    "-byte record (stray bytes at offset " +
                    std::to_string(buf.size() - buf.size() % kRecord) + ")");
  std::uint32_t n = static_cast<std::uint32_t>(buf.size() / kRecord);
  Dataset ds;
  ds.features = Tensor::zeros({n, 3, 32, 32});
  ds.labels.resize(n);
  std::uint16_t max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::size_t off = static_cast<std::size_t>(i) * kRecord;
    ds.labels[i] = buf[off];
    max_label = std::max(max_label, ds.labels[i]);
    for (std::size_t j = 0; j < kRecord - 1; ++j)
      ds.features.data[static_cast<std::size_t>(i) * (kRecord - 1) + j] =
          static_cast<float>(buf[off + 1 + j]) / 255.0f;
  }
  ds.num_classes = static_cast<std::uint32_t>(max_label) + 1;
  return ds;
}

// ---------------------------------------------------------------------------
// Data source description (filled from config).

enum class SourceKind { Synthetic, MnistIdx, Csv, CifarBin };

struct DataSource {
  SourceKind kind = SourceKind::Synthetic;
  // synthetic
  std::uint32_t n = 0, dims = 0, classes = 0;
  std::uint64_t seed = 0;
  // files
  std::string images_path, labels_path;  // mnist_idx
  std::string path;                      // csv / cifar_bin
};

inline Dataset load_dataset(const DataSource& src) {
  Dataset ds;
  switch (src.kind) {
    case SourceKind::Synthetic: ds = synthetic_blobs(src.n, src.dims, src.classes, src.seed); break;
    case SourceKind::MnistIdx: ds = load_mnist_idx(src.images_path, src.labels_path); break;
    case SourceKind::Csv: ds = load_csv(src.path); break;
    case SourceKind::CifarBin: ds = load_cifar_bin(src.path); break;
  }
  check_dataset(ds, "load_dataset");
  return ds;
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionKind { HorizontalEqual, HorizontalDirichlet, VerticalColumns };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::HorizontalEqual;
  std::uint32_t num_clients = 1;
  double alpha = 1.0;                        // dirichlet concentration
  std::vector<std::uint32_t> feature_widths; // vertical column widths
};

// One client's slice. `rows[i]` is the original dataset row behind shard row i
// (identity for vertical shards, which keep global row order).
struct Shard {
  Tensor features;
  std::vector<std::uint16_t> labels;  // empty when this client holds no labels
  std::vector<std::uint32_t> rows;
  std::uint32_t num_classes = 0;

  std::uint32_t size() const { return features.shape.empty() ? 0 : features.shape[0]; }
  bool has_labels() const { return !labels.empty(); }
};

namespace detail {

inline Shard take_rows(const Dataset& ds, const std::vector<std::uint32_t>& rows,
                       bool with_labels) {
  Shard sh;
  sh.rows = rows;
  sh.num_classes = ds.num_classes;
  Shape shp = ds.features.shape;
  shp[0] = static_cast<std::uint32_t>(rows.size());
  sh.features = Tensor::zeros(shp);
  std::size_t stride = ds.feature_count();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(ds.features.data.begin() + static_cast<std::size_t>(rows[i]) * stride, stride,
                sh.features.data.begin() + i * stride);
  if (with_labels) {
    sh.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) sh.labels[i] = ds.labels[rows[i]];
  }
  return sh;
}

// Split `count` items into `parts` near-equal contiguous sizes (first shards
// take the remainder, so 10 into 3 gives {4,3,3}).
inline std::vector<std::uint32_t> near_equal_sizes(std::uint32_t count, std::uint32_t parts) {
  std::vector<std::uint32_t> sizes(parts, count / parts);
  for (std::uint32_t i = 0; i < count % parts; ++i) ++sizes[i];
  return sizes;
}

// Apportion `count` items by proportions using largest remainders so the
// shares sum exactly to count.
inline std::vector<std::uint32_t> apportion(std::uint32_t count, const std::vector<double>& prop) {
  std::size_t k = prop.size();
  std::vector<std::uint32_t> share(k);
  std::vector<std::pair<double, std::size_t>> rem(k);
  std::uint32_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double exact = prop[i] * count;
    share[i] = static_cast<std::uint32_t>(exact);
    used += share[i];
    rem[i] = {exact - share[i], i};
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::uint32_t i = 0; used < count; ++i, ++used) ++share[rem[i % k].second];
  return share;
}

}  // namespace detail

inline std::vector<Shard> partition_dataset(const Dataset& ds, const PartitionSpec& spec,
                                            std::uint64_t seed) {
  check_dataset(ds, "partition_dataset");
  if (spec.num_clients == 0) throw DataError("partition: need at least one client");
  Rng rng(derive_seed(seed, 0xDA7A));
  std::uint32_t n = ds.size();

  switch (spec.kind) {
    case PartitionKind::HorizontalEqual: {
      if (spec.num_clients > n)
        throw DataError("partition: " + std::to_string(spec.num_clients) + " clients but only " +
                        std::to_string(n) + " samples");
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      rng.shuffle(order);
      auto sizes = detail::near_equal_sizes(n, spec.num_clients);
      std::vector<Shard> shards;
      std::size_t at = 0;
      for (std::uint32_t c = 0; c < spec.num_clients; ++c) {
        std::vector<std::uint32_t> rows(order.begin() + at, order.begin() + at + sizes[c]);
        at += sizes[c];
        shards.push_back(detail::take_rows(ds, rows, /*with_labels=*/true));
      }
      return shards;
    }

    case PartitionKind::HorizontalDirichlet: {
      if (spec.alpha <= 0.0) throw DataError("partition: dirichlet alpha must be positive");
      // Bucket rows by class, shuffle each bucket, then hand each client a
      // Dirichlet-proportioned contiguous run of every class.
      std::vector<std::vector<std::uint32_t>> by_class(ds.num_classes);
      for (std::uint32_t i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);
      std::vector<std::vector<std::uint32_t>> rows(spec.num_clients);
      for (auto& bucket : by_class) {
        if (bucket.empty()) continue;
        rng.shuffle(bucket);
        auto prop = rng.dirichlet(spec.alpha, spec.num_clients);
        auto share = detail::apportion(static_cast<std::uint32_t>(bucket.size()), prop);
        std::size_t at = 0;
        for (std::uint32_t c = 0; c < spec.num_clients; ++c) {
          rows[c].insert(rows[c].end(), bucket.begin() + at, bucket.begin() + at + share[c]);
          at += share[c];
        }
      }
      std::vector<Shard> shards;
      for (std::uint32_t c = 0; c < spec.num_clients; ++c) {
        rng.shuffle(rows[c]);  // avoid class-ordered batches
        shards.push_back(detail::take_rows(ds, rows[c], /*with_labels=*/true));
      }
      return shards;
    }

    case PartitionKind::VerticalColumns: {
      if (spec.feature_widths.size() != spec.num_clients)
        throw DataError("partition: " + std::to_string(spec.feature_widths.size()) +
                        " feature widths for " + std::to_string(spec.num_clients) + " clients");
      std::uint32_t total = ds.feature_count();
      std::uint32_t sum = 0;
      for (std::uint32_t w : spec.feature_widths) {
        if (w == 0) throw DataError("partition: zero feature width");
        sum += w;
      }
      if (sum != total)
        throw DataError("partition: feature widths sum to " + std::to_string(sum) + " but " +
                        "the dataset has " + std::to_string(total) + " features per row");
      // Rows stay aligned across clients; labels live with client 0 only.
      std::vector<Shard> shards;
      std::uint32_t offset = 0;
      for (std::uint32_t c = 0; c < spec.num_clients; ++c) {
        std::uint32_t w = spec.feature_widths[c];
        Shard sh;
        sh.num_classes = ds.num_classes;
        sh.features = Tensor::zeros({n, w});
        sh.rows.resize(n);
        std::iota(sh.rows.begin(), sh.rows.end(), 0u);
        for (std::uint32_t i = 0; i < n; ++i)
          std::copy_n(ds.features.data.begin() + static_cast<std::size_t>(i) * total + offset, w,
                      sh.features.data.begin() + static_cast<std::size_t>(i) * w);
        if (c == 0) sh.labels = ds.labels;
        offset += w;
        shards.push_back(std::move(sh));
      }
      return shards;
    }
  }
  throw DataError("partition: unknown kind");
}

// ---------------------------------------------------------------------------
// Batch extraction: contiguous shard rows [start, start+count).

inline Tensor batch_features(const Shard& sh, std::uint32_t start, std::uint32_t count) {
  if (count == 0 || start + count > sh.size())
    throw DataError("batch [" + std::to_string(start) + "," + std::to_string(start + count) +
                    ") out of range for shard of " + std::to_string(sh.size()));
  Shape shp = sh.features.shape;
  shp[0] = count;
  Tensor out = Tensor::zeros(shp);
  std::size_t stride = shape_numel(Shape(shp.begin() + 1, shp.end()));
  std::copy_n(sh.features.data.begin() + static_cast<std::size_t>(start) * stride,
              static_cast<std::size_t>(count) * stride, out.data.begin());
  return out;
}

inline std::vector<std::uint16_t> batch_labels(const Shard& sh, std::uint32_t start,
                                               std::uint32_t count) {
  if (!sh.has_labels()) throw DataError("shard holds no labels");
  if (count == 0 || start + count > sh.labels.size())
    throw DataError("label batch [" + std::to_string(start) + "," +
                    std::to_string(start + count) + ") out of range");
  return std::vector<std::uint16_t>(sh.labels.begin() + start, sh.labels.begin() + start + count);
}

}  // namespace splitnn
