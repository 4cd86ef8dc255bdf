#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedsched/datagen.hpp"

using namespace fedsched;

namespace {

// Dataset whose feature column 0 is a unique row id, so partition outputs
// can be checked for disjointness and coverage exactly.
Dataset tagged_dataset(int n, int classes) {
  Dataset d;
  d.features.resize(n, 2);
  d.labels.resize(n);
  for (int r = 0; r < n; ++r) {
    d.features(r, 0) = r;
    d.features(r, 1) = 0.0;
    d.labels[r] = r % classes;
  }
  return d;
}

std::set<int> collect_ids(const std::vector<Dataset>& parts) {
  std::set<int> ids;
  for (const Dataset& p : parts) {
    for (Eigen::Index r = 0; r < p.size(); ++r) {
      const int id = static_cast<int>(p.features(r, 0));
      REQUIRE(ids.count(id) == 0);  // disjointness
      ids.insert(id);
    }
  }
  return ids;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

void append(std::vector<std::uint8_t>& dst, const std::vector<std::uint8_t>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

TEST_CASE("synthetic classification is balanced and deterministic") {
  std::mt19937_64 a(9), b(9);
  const Dataset d1 = synth_classification(a, 1003, 5, 4, 2.5);
  const Dataset d2 = synth_classification(b, 1003, 5, 4, 2.5);
  REQUIRE(d1.size() == 1003);
  CHECK(d1.features == d2.features);
  CHECK(d1.labels == d2.labels);
  std::vector<int> counts(4, 0);
  for (Eigen::Index r = 0; r < d1.size(); ++r) {
    const int label = static_cast<int>(d1.labels[r]);
    REQUIRE(label >= 0);
    REQUIRE(label < 4);
    ++counts[label];
  }
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(counts[c] - 1003 / 4) <= 1);
  }
}

TEST_CASE("synthetic regression is linear in its planted weights") {
  std::mt19937_64 rng(10);
  Eigen::VectorXd w(3);
  w << 0.5, -1.0, 2.0;
  const Dataset clean = synth_regression(rng, 500, 3, w, 0.0);
  CHECK((clean.labels - clean.features * w).cwiseAbs().maxCoeff() < 1e-12);
  const Dataset noisy = synth_regression(rng, 20000, 3, w, 0.3);
  const Eigen::VectorXd resid = noisy.labels - noisy.features * w;
  CHECK(resid.mean() == doctest::Approx(0.0).epsilon(0.02));
  CHECK(std::sqrt(resid.squaredNorm() / 20000) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("iid partition splits evenly and covers a truncated prefix set") {
  const Dataset d = tagged_dataset(1000, 7);
  PartitionSpec spec;
  spec.kind = PartitionSpec::Kind::Iid;
  std::mt19937_64 rng(3);
  const auto parts = partition(d, 8, spec, rng);
  REQUIRE(parts.size() == 8);
  for (const Dataset& p : parts) CHECK(p.size() == 125);
  const std::set<int> ids = collect_ids(parts);
  CHECK(ids.size() == 1000);  // coverage: every sample used exactly once
}

TEST_CASE("iid partition truncates what it cannot split evenly") {
  const Dataset d = tagged_dataset(1003, 7);
  PartitionSpec spec;
  spec.kind = PartitionSpec::Kind::Iid;
  std::mt19937_64 rng(4);
  const auto parts = partition(d, 8, spec, rng);
  Eigen::Index total = 0;
  for (const Dataset& p : parts) {
    CHECK(p.size() == 125);
    total += p.size();
  }
  CHECK(total == 1000);
  collect_ids(parts);  // still disjoint
}

TEST_CASE("shard partition: disjoint, covering, label-limited") {
  const int n = 2000, classes = 10, devices = 20;
  for (int l : {1, 2, 5}) {
    for (int seed = 0; seed < 10; ++seed) {
      const Dataset d = tagged_dataset(n, classes);
      PartitionSpec spec;
      spec.kind = PartitionSpec::Kind::Shards;
      spec.shards_per_device = l;
      std::mt19937_64 rng(seed);
      const auto parts = partition(d, devices, spec, rng);
      REQUIRE(parts.size() == devices);
      const std::set<int> ids = collect_ids(parts);
      CHECK(ids.size() == n);  // all shards dealt when devices * l = 2l * classes
      for (const Dataset& p : parts) {
        CHECK(p.size() == n / devices);
        std::set<int> labels;
        for (Eigen::Index r = 0; r < p.size(); ++r) {
          labels.insert(static_cast<int>(p.labels[r]));
        }
        CHECK(static_cast<int>(labels.size()) <= l);
      }
    }
  }
}

TEST_CASE("shard partition rejects impossible deals") {
  const Dataset d = tagged_dataset(400, 4);
  PartitionSpec spec;
  spec.kind = PartitionSpec::Kind::Shards;
  std::mt19937_64 rng(5);
  spec.shards_per_device = 1;
  CHECK_THROWS_AS(partition(d, 9, spec, rng), ConfigError);  // > 2 * classes devices
  spec.shards_per_device = 5;
  CHECK_THROWS_AS(partition(d, 2, spec, rng), ConfigError);  // l > classes
  // A class pool with fewer samples than shards cannot be cut.
  Dataset tiny = tagged_dataset(12, 4);
  spec.shards_per_device = 3;
  CHECK_THROWS_AS(partition(tiny, 2, spec, rng), ConfigError);
}

TEST_CASE("idx loader round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto img_path = dir / "fedsched_test_images.idx";
  const auto lbl_path = dir / "fedsched_test_labels.idx";

  std::vector<std::uint8_t> img;
  append(img, be32(0x00000803));
  append(img, be32(2));  // images
  append(img, be32(2));  // rows
  append(img, be32(2));  // cols
  append(img, {0, 128, 255, 64, 10, 20, 30, 40});
  write_bytes(img_path, img);

  std::vector<std::uint8_t> lbl;
  append(lbl, be32(0x00000801));
  append(lbl, be32(2));
  append(lbl, {7, 1});
  write_bytes(lbl_path, lbl);

  const Dataset d = load_idx_pair(img_path.string(), lbl_path.string());
  REQUIRE(d.size() == 2);
  REQUIRE(d.features.cols() == 4);
  CHECK(d.features(0, 0) == doctest::Approx(0.0));
  CHECK(d.features(0, 1) == doctest::Approx(128.0 / 255.0));
  CHECK(d.features(0, 2) == doctest::Approx(1.0));
  CHECK(d.features(1, 3) == doctest::Approx(40.0 / 255.0));
  CHECK(d.labels[0] == 7.0);
  CHECK(d.labels[1] == 1.0);

  std::filesystem::remove(img_path);
  std::filesystem::remove(lbl_path);
}

TEST_CASE("idx loader rejects malformed input with a byte offset") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bad_magic = dir / "fedsched_bad_magic.idx";
  std::vector<std::uint8_t> bytes;
  append(bytes, be32(0x00000999));
  append(bytes, be32(1));
  write_bytes(bad_magic, bytes);
  CHECK_THROWS_AS(load_idx(bad_magic.string()), IdxParseError);
  try {
    load_idx(bad_magic.string());
  } catch (const IdxParseError& err) {
    CHECK(std::string(err.what()).find("byte 0") != std::string::npos);
  }
  std::filesystem::remove(bad_magic);

  const auto truncated = dir / "fedsched_truncated.idx";
  std::vector<std::uint8_t> img;
  append(img, be32(0x00000803));
  append(img, be32(3));
  append(img, be32(2));
  append(img, be32(2));
  append(img, {1, 2, 3});  // far short of 12 pixels
  write_bytes(truncated, img);
  CHECK_THROWS_AS(load_idx(truncated.string()), IdxParseError);
  std::filesystem::remove(truncated);

  CHECK_THROWS_AS(load_idx((dir / "fedsched_missing.idx").string()), IdxParseError);

  // Count mismatch between an image file and its labels.
  const auto img_path = dir / "fedsched_pair_images.idx";
  const auto lbl_path = dir / "fedsched_pair_labels.idx";
  std::vector<std::uint8_t> good_img;
  append(good_img, be32(0x00000803));
  append(good_img, be32(1));
  append(good_img, be32(1));
  append(good_img, be32(1));
  append(good_img, {9});
  write_bytes(img_path, good_img);
  std::vector<std::uint8_t> two_labels;
  append(two_labels, be32(0x00000801));
  append(two_labels, be32(2));
  append(two_labels, {0, 1});
  write_bytes(lbl_path, two_labels);
  CHECK_THROWS_AS(load_idx_pair(img_path.string(), lbl_path.string()), IdxParseError);
  std::filesystem::remove(img_path);
  std::filesystem::remove(lbl_path);
}
