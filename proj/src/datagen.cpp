#include "fedsched/datagen.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fedsched {
namespace {

// Deterministic partial Fisher-Yates: the first `take` entries of idx end up
// a uniform sample without replacement.
void shuffle_prefix(std::vector<int>& idx, std::size_t take, std::mt19937_64& rng) {
  for (std::size_t j = 0; j + 1 < idx.size() && j < take; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, idx.size() - 1);
    std::swap(idx[j], idx[pick(rng)]);
  }
}

Dataset gather(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(rows[r]);
    out.labels[static_cast<Eigen::Index>(r)] = data.labels[rows[r]];
  }
  return out;
}

std::uint32_t read_be32(std::istream& in, std::size_t offset) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw IdxParseError("idx: truncated at byte " + std::to_string(offset));
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset synth_classification(std::mt19937_64& rng, int n, int dims, int classes,
                             double spread) {
  if (n < 1 || dims < 1 || classes < 2 || classes > n) {
    throw ConfigError("synth_classification: need n >= classes >= 2 and dims >= 1");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd means(classes, dims);
  for (int c = 0; c < classes; ++c) {
    for (int d = 0; d < dims; ++d) means(c, d) = spread * unit(rng);
  }
  Dataset out;
  out.features.resize(n, dims);
  out.labels.resize(n);
  for (int r = 0; r < n; ++r) {
    const int c = r % classes;  // balanced to within one sample
    out.labels[r] = c;
    for (int d = 0; d < dims; ++d) out.features(r, d) = means(c, d) + unit(rng);
  }
  return out;
}

Dataset synth_regression(std::mt19937_64& rng, int n, int dims,
                         const Eigen::VectorXd& w_true, double noise_std) {
  if (n < 1 || dims < 1 || w_true.size() != dims || noise_std < 0.0) {
    throw ConfigError("synth_regression: bad shape or negative noise");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  Dataset out;
  out.features.resize(n, dims);
  out.labels.resize(n);
  for (int r = 0; r < n; ++r) {
    for (int d = 0; d < dims; ++d) out.features(r, d) = unit(rng);
    out.labels[r] = out.features.row(r).dot(w_true) + noise_std * unit(rng);
  }
  return out;
}

std::vector<Dataset> partition(const Dataset& data, int device_count,
                               const PartitionSpec& spec, std::mt19937_64& rng) {
  if (device_count < 1) throw ConfigError("partition: need at least one device");
  const int n = static_cast<int>(data.size());
  if (n < device_count) throw ConfigError("partition: fewer samples than devices");

  if (spec.kind == PartitionSpec::Kind::Iid) {
    const int per = n / device_count;
    if (per * device_count != n) {
      std::cerr << "partition: truncating " << n - per * device_count
                << " samples to keep equal splits\n";
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_prefix(idx, idx.size(), rng);
    std::vector<Dataset> out;
    out.reserve(device_count);
    for (int dev = 0; dev < device_count; ++dev) {
      out.push_back(gather(data, {idx.begin() + dev * per, idx.begin() + (dev + 1) * per}));
    }
    return out;
  }

  // Shards: per-class pools, each split into 2*l shards.
  const int l = spec.shards_per_device;
  if (l < 1) throw ConfigError("partition: shards_per_device must be >= 1");
  std::vector<std::vector<int>> pools;
  for (int r = 0; r < n; ++r) {
    const int label = static_cast<int>(data.labels[r]);
    if (label < 0) throw ConfigError("partition: shard partitioning needs labels >= 0");
    if (label >= static_cast<int>(pools.size())) pools.resize(label + 1);
    pools[label].push_back(r);
  }
  const int classes = static_cast<int>(pools.size());
  if (device_count > 2 * classes || l > classes) {
    throw ConfigError("partition: cannot deal " + std::to_string(l) +
                      " distinct-label shards each to " + std::to_string(device_count) +
                      " devices from " + std::to_string(classes) + " classes");
  }
  // 2*l shards per class, sizes within one sample of each other.
  std::vector<std::vector<std::vector<int>>> shards(classes);
  for (int c = 0; c < classes; ++c) {
    auto& pool = pools[c];
    if (static_cast<int>(pool.size()) < 2 * l) {
      throw ConfigError("partition: class " + std::to_string(c) +
                        " too small for " + std::to_string(2 * l) + " shards");
    }
    shuffle_prefix(pool, pool.size(), rng);
    const int total = static_cast<int>(pool.size());
    int start = 0;
    for (int s = 0; s < 2 * l; ++s) {
      const int count = total / (2 * l) + (s < total % (2 * l) ? 1 : 0);
      shards[c].emplace_back(pool.begin() + start, pool.begin() + start + count);
      start += count;
    }
  }
  // Deal devices l consecutive classes each (cyclically); every class hands
  // out at most ceil(device_count*l/classes) <= 2*l shards.
  std::vector<Dataset> out;
  out.reserve(device_count);
  int next_class = 0;
  for (int dev = 0; dev < device_count; ++dev) {
    std::vector<int> rows;
    for (int s = 0; s < l; ++s) {
      const int c = (next_class + s) % classes;
      if (shards[c].empty()) {
        throw ConfigError("partition: class " + std::to_string(c) + " ran out of shards");
      }
      auto& shard = shards[c].back();
      rows.insert(rows.end(), shard.begin(), shard.end());
      shards[c].pop_back();
    }
    next_class = (next_class + l) % classes;
    std::sort(rows.begin(), rows.end());
    out.push_back(gather(data, rows));
  }
  return out;
}

Dataset load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxParseError("idx: cannot open " + path);
  const std::uint32_t magic = read_be32(in, 0);
  if (magic != 0x00000803u && magic != 0x00000801u) {
    throw IdxParseError("idx: bad magic at byte 0 in " + path);
  }
  Dataset out;
  if (magic == 0x00000801u) {  // labels
    const std::uint32_t count = read_be32(in, 4);
    std::vector<unsigned char> raw(count);
    if (!in.read(reinterpret_cast<char*>(raw.data()), count)) {
      const std::size_t got = static_cast<std::size_t>(in.gcount());
      throw IdxParseError("idx: truncated at byte " + std::to_string(8 + got) +
                          " in " + path);
    }
    out.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) out.labels[i] = raw[i];
    return out;
  }
  const std::uint32_t count = read_be32(in, 4);
  const std::uint32_t rows = read_be32(in, 8);
  const std::uint32_t cols = read_be32(in, 12);
  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> raw(pixels);
  out.features.resize(count, static_cast<Eigen::Index>(pixels));
  for (std::uint32_t img = 0; img < count; ++img) {
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
      const std::size_t got = static_cast<std::size_t>(in.gcount());
      throw IdxParseError("idx: truncated at byte " +
                          std::to_string(16 + std::size_t(img) * pixels + got) +
                          " in " + path);
    }
    for (std::size_t px = 0; px < pixels; ++px) {
      out.features(img, static_cast<Eigen::Index>(px)) = raw[px] / 255.0;
    }
  }
  return out;
}

Dataset load_idx_pair(const std::string& images_path, const std::string& labels_path) {
  Dataset images = load_idx(images_path);
  const Dataset labels = load_idx(labels_path);
  if (images.features.rows() != labels.labels.size()) {
    throw IdxParseError("idx: image/label count mismatch between " + images_path +
                        " and " + labels_path);
  }
  images.labels = labels.labels;
  return images;
}

}  // namespace fedsched
