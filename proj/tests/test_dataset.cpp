// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include "data_util.hpp"
#include "splitnn/dataset.hpp"

using namespace splitnn;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::set<std::uint32_t> row_union(const std::vector<Shard>& shards) {
  std::set<std::uint32_t> seen;
  for (const auto& sh : shards)
    for (auto r : sh.rows) {
      REQUIRE(seen.insert(r).second);  // no duplicates across shards
    }
  return seen;
}

}  // namespace

TEST_CASE("synthetic blobs are deterministic and class-separated") {
  Dataset a = synthetic_blobs(120, 4, 3, 7);
  Dataset b = synthetic_blobs(120, 4, 3, 7);
  REQUIRE(a.features.data == b.features.data);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.size() == 120);
  REQUIRE(a.num_classes == 3);
  REQUIRE(a.sample_shape() == Shape{4});
  for (std::uint32_t i = 0; i < a.size(); ++i) REQUIRE(a.labels[i] == i % 3);

  // Class c sits 3.0 along axis c: the per-class mean of that axis is near 3.
  for (std::uint32_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    int count = 0;
    for (std::uint32_t i = 0; i < a.size(); ++i)
      if (a.labels[i] == c) {
        mean += a.features.at2(i, c);
        ++count;
      }
    mean /= count;
    REQUIRE(mean > 2.0);
    REQUIRE(mean < 4.0);
  }
  Dataset c = synthetic_blobs(120, 4, 3, 8);
  REQUIRE(a.features.data != c.features.data);
  REQUIRE_THROWS_AS(synthetic_blobs(0, 4, 3, 7), DataError);
}

TEST_CASE("idx loader round-trips images and labels") {
  auto img_path = tmp_path("t_idx_img");
  auto lab_path = tmp_path("t_idx_lab");
  std::vector<std::uint8_t> pixels(10 * 28 * 28, 0);
  pixels[0] = 255;                       // sample 0, pixel (0,0)
  pixels[28 * 28 + 5] = 128;             // sample 1, pixel 5
  std::vector<std::uint8_t> labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  testutil::write_idx_images(img_path, pixels, 10, 28, 28);
  testutil::write_idx_labels(lab_path, labels);

  Dataset ds = load_mnist_idx(img_path, lab_path);
  REQUIRE(ds.features.shape == Shape{10, 1, 28, 28});
  REQUIRE(ds.size() == 10);
  REQUIRE(ds.num_classes == 10);
  REQUIRE(ds.features.data[0] == 1.0f);
  REQUIRE(ds.features.data[28 * 28 + 5] == Catch::Approx(128.0 / 255.0));
  for (int i = 0; i < 10; ++i) REQUIRE(ds.labels[i] == i);
}

TEST_CASE("idx loader reports malformed files with offsets") {
  auto img_path = tmp_path("t_idx_bad_img");
  auto lab_path = tmp_path("t_idx_bad_lab");
  std::vector<std::uint8_t> pixels(2 * 4 * 4, 7);
  testutil::write_idx_images(img_path, pixels, 2, 4, 4, /*magic=*/0x00000802u);
  testutil::write_idx_labels(lab_path, {0, 1});
  REQUIRE_THROWS_WITH(load_mnist_idx(img_path, lab_path),
                      Catch::Matchers::ContainsSubstring("bad magic") &&
                          Catch::Matchers::ContainsSubstring("offset 0"));

  testutil::write_idx_images(img_path, pixels, 2, 4, 4);
  testutil::write_idx_labels(lab_path, {0, 1, 1});  // 3 labels vs 2 images
  REQUIRE_THROWS_WITH(load_mnist_idx(img_path, lab_path),
                      Catch::Matchers::ContainsSubstring("2 images") &&
                          Catch::Matchers::ContainsSubstring("3 labels"));

  std::vector<std::uint8_t> short_pixels(2 * 4 * 4 - 1, 7);  // truncated image data
  testutil::write_idx_images(img_path, short_pixels, 2, 4, 4);
  testutil::write_idx_labels(lab_path, {0, 1});
  REQUIRE_THROWS_AS(load_mnist_idx(img_path, lab_path), DataError);
  REQUIRE_THROWS_AS(load_mnist_idx(tmp_path("no_such_file"), lab_path), DataError);
}

TEST_CASE("csv loader parses features and rejects bad cells by line") {
  auto path = tmp_path("t_csv");
  testutil::write_text(path, "1.5,2.5,0\n-0.25,4,1\n\n0,1e-3,1\n");
  Dataset ds = load_csv(path);
  REQUIRE(ds.features.shape == Shape{3, 2});
  REQUIRE(ds.features.at2(0, 0) == 1.5f);
  REQUIRE(ds.features.at2(1, 0) == -0.25f);
  REQUIRE(ds.features.at2(2, 1) == 1e-3f);
  REQUIRE(ds.labels == std::vector<std::uint16_t>{0, 1, 1});
  REQUIRE(ds.num_classes == 2);

  testutil::write_text(path, "1,2,0\n3,oops,1\n");
  REQUIRE_THROWS_WITH(load_csv(path), Catch::Matchers::ContainsSubstring("line 2") &&
                                          Catch::Matchers::ContainsSubstring("oops"));
  testutil::write_text(path, "1,2,0\n3,4\n");
  REQUIRE_THROWS_WITH(load_csv(path), Catch::Matchers::ContainsSubstring("line 2"));
  testutil::write_text(path, "1,2,zero\n");
  REQUIRE_THROWS_WITH(load_csv(path), Catch::Matchers::ContainsSubstring("label"));
  testutil::write_text(path, "");
  REQUIRE_THROWS_AS(load_csv(path), DataError);
}

TEST_CASE("cifar binary loader parses records and flags stray bytes") {
  auto path = tmp_path("t_cifar");
  std::vector<std::uint8_t> records;
  for (int r = 0; r < 3; ++r) {
    records.push_back(static_cast<std::uint8_t>(r));
    for (int j = 0; j < 3072; ++j)
      records.push_back(static_cast<std::uint8_t>((r + j) % 256));
  }
  testutil::write_cifar_bin(path, records);
  Dataset ds = load_cifar_bin(path);
  REQUIRE(ds.features.shape == Shape{3, 3, 32, 32});
  REQUIRE(ds.labels == std::vector<std::uint16_t>{0, 1, 2});
  REQUIRE(ds.features.data[0] == 0.0f);
  REQUIRE(ds.features.data[1] == Catch::Approx(1.0 / 255.0));

  records.push_back(99);  // stray trailing byte
  testutil::write_cifar_bin(path, records);
  REQUIRE_THROWS_WITH(load_cifar_bin(path), Catch::Matchers::ContainsSubstring("offset"));
}

TEST_CASE("load_dataset dispatches by source kind") {
  DataSource src;
  src.kind = SourceKind::Synthetic;
  src.n = 50;
  src.dims = 6;
  src.classes = 2;
  src.seed = 3;
  Dataset ds = load_dataset(src);
  REQUIRE(ds.size() == 50);
  REQUIRE(ds.feature_count() == 6);
}

TEST_CASE("horizontal equal partition gives near-equal disjoint coverage") {
  Dataset ds = synthetic_blobs(10, 3, 2, 1);
  auto shards = partition_dataset(ds, {PartitionKind::HorizontalEqual, 3, 1.0, {}}, 42);
  REQUIRE(shards.size() == 3);
  REQUIRE(shards[0].size() == 4);
  REQUIRE(shards[1].size() == 3);
  REQUIRE(shards[2].size() == 3);
  auto seen = row_union(shards);
  REQUIRE(seen.size() == 10);

  // Shuffled: the first shard is not simply rows 0..3 for this seed.
  std::vector<std::uint32_t> first(shards[0].rows);
  std::vector<std::uint32_t> sorted_first = first;
  std::sort(sorted_first.begin(), sorted_first.end());
  bool identity_prefix = sorted_first == std::vector<std::uint32_t>{0, 1, 2, 3};
  REQUIRE((!identity_prefix || first != sorted_first));

  // Labels and features follow the row map.
  for (const auto& sh : shards)
    for (std::uint32_t i = 0; i < sh.size(); ++i) {
      REQUIRE(sh.labels[i] == ds.labels[sh.rows[i]]);
      for (std::uint32_t d = 0; d < 3; ++d)
        REQUIRE(sh.features.at2(i, d) == ds.features.at2(sh.rows[i], d));
    }

  auto again = partition_dataset(ds, {PartitionKind::HorizontalEqual, 3, 1.0, {}}, 42);
  for (int c = 0; c < 3; ++c) REQUIRE(again[c].rows == shards[c].rows);
  auto other = partition_dataset(ds, {PartitionKind::HorizontalEqual, 3, 1.0, {}}, 43);
  bool any_diff = false;
  for (int c = 0; c < 3; ++c) any_diff = any_diff || other[c].rows != shards[c].rows;
  REQUIRE(any_diff);

  REQUIRE_THROWS_AS(partition_dataset(ds, {PartitionKind::HorizontalEqual, 11, 1.0, {}}, 1),
                    DataError);
}

TEST_CASE("dirichlet partition is reproducible and covers the dataset") {
  Dataset ds = synthetic_blobs(200, 4, 2, 9);
  PartitionSpec spec{PartitionKind::HorizontalDirichlet, 2, 0.1, {}};
  auto shards = partition_dataset(ds, spec, 5);
  REQUIRE(shards.size() == 2);
  auto seen = row_union(shards);
  REQUIRE(seen.size() == 200);
  auto again = partition_dataset(ds, spec, 5);
  REQUIRE(again[0].rows == shards[0].rows);
  REQUIRE(again[1].rows == shards[1].rows);

  // Low alpha concentrates classes: at least one shard should be skewed well
  // past the 50/50 split an equal partition would give.
  double worst = 0.0;
  for (const auto& sh : shards) {
    if (sh.size() == 0) continue;
    double ones = 0;
    for (auto l : sh.labels) ones += l;
    double frac = ones / sh.size();
    worst = std::max({worst, frac, 1.0 - frac});
  }
  REQUIRE(worst > 0.6);
  REQUIRE_THROWS_AS(partition_dataset(ds, {PartitionKind::HorizontalDirichlet, 2, 0.0, {}}, 1),
                    DataError);
}

TEST_CASE("vertical partition slices columns and re-concatenates exactly") {
  Dataset ds = synthetic_blobs(20, 10, 2, 11);
  PartitionSpec spec{PartitionKind::VerticalColumns, 2, 1.0, {4, 6}};
  auto shards = partition_dataset(ds, spec, 3);
  REQUIRE(shards[0].features.shape == Shape{20, 4});
  REQUIRE(shards[1].features.shape == Shape{20, 6});
  REQUIRE(shards[0].has_labels());
  REQUIRE_FALSE(shards[1].has_labels());
  REQUIRE(shards[0].labels == ds.labels);

  for (std::uint32_t i = 0; i < 20; ++i) {
    REQUIRE(shards[0].rows[i] == i);
    for (std::uint32_t d = 0; d < 10; ++d) {
      float got = d < 4 ? shards[0].features.at2(i, d) : shards[1].features.at2(i, d - 4);
      REQUIRE(got == ds.features.at2(i, d));
    }
  }

  REQUIRE_THROWS_WITH(
      partition_dataset(ds, {PartitionKind::VerticalColumns, 2, 1.0, {4, 5}}, 3),
      Catch::Matchers::ContainsSubstring("sum to 9"));
  REQUIRE_THROWS_AS(partition_dataset(ds, {PartitionKind::VerticalColumns, 3, 1.0, {4, 6}}, 3),
                    DataError);
}

TEST_CASE("batch extraction copies contiguous shard rows") {
  Dataset ds = synthetic_blobs(12, 5, 3, 2);
  auto shards = partition_dataset(ds, {PartitionKind::HorizontalEqual, 2, 1.0, {}}, 1);
  const Shard& sh = shards[0];
  Tensor b = batch_features(sh, 2, 3);
  REQUIRE(b.shape == Shape{3, 5});
  for (std::uint32_t i = 0; i < 3; ++i)
    for (std::uint32_t d = 0; d < 5; ++d)
      REQUIRE(b.at2(i, d) == sh.features.at2(2 + i, d));
  auto lb = batch_labels(sh, 2, 3);
  REQUIRE(lb.size() == 3);
  REQUIRE(lb[0] == sh.labels[2]);
  REQUIRE_THROWS_AS(batch_features(sh, 5, 2), DataError);
  REQUIRE_THROWS_AS(batch_labels(sh, 0, 99), DataError);

  Shard no_labels = partition_dataset(synthetic_blobs(8, 4, 2, 1),
                                      {PartitionKind::VerticalColumns, 2, 1.0, {2, 2}}, 1)[1];
  REQUIRE_THROWS_AS(batch_labels(no_labels, 0, 1), DataError);
}

TEST_CASE("digit fixture renders learnable two-class images") {
  auto img_path = tmp_path("t_digits_img");
  auto lab_path = tmp_path("t_digits_lab");
  testutil::write_digit_idx(img_path, lab_path, 40, 17);
  Dataset ds = load_mnist_idx(img_path, lab_path);
  REQUIRE(ds.size() == 40);
  REQUIRE(ds.num_classes == 2);
  REQUIRE(ds.features.shape == Shape{40, 1, 28, 28});
  // Ring (class 0) lights pixels far from center column; bar (class 1) mostly
  // lights the middle columns. Check the corner band differs between classes.
  double ring_edge = 0, bar_edge = 0;
  for (std::uint32_t i = 0; i < 40; ++i) {
    double edge = 0;
    for (int y = 10; y < 18; ++y)
      for (int x = 3; x < 9; ++x)
        edge += ds.features.data[(static_cast<std::size_t>(i) * 28 + y) * 28 + x];
    (ds.labels[i] == 0 ? ring_edge : bar_edge) += edge;
  }
  REQUIRE(ring_edge > bar_edge * 2);
}
