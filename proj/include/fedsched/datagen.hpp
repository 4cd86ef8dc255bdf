#pragma once

#include <Eigen/Core>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsched {

// Rows are samples. Labels hold class indices for classification tasks and
// real targets for regression.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;

  Eigen::Index size() const { return features.rows(); }
};

// How local datasets are carved out of the global one.
//   Iid:    global shuffle, equal contiguous slices.
//   Shards: sort by label, split every class pool into 2*shards_per_device
//           shards, deal each device that many shards with pairwise
//           distinct labels. Device data is label-skewed by construction.
struct PartitionSpec {
  enum class Kind { Iid, Shards } kind = Kind::Iid;
  int shards_per_device = 1;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gaussian clusters: one mean per class drawn from N(0, spread^2 I), unit
// isotropic noise around it, class sizes balanced to within one sample.
Dataset synth_classification(std::mt19937_64& rng, int n, int dims, int classes,
                             double spread = 2.5);

// y = w_true . x + Normal(0, noise_std), x ~ N(0, I).
Dataset synth_regression(std::mt19937_64& rng, int n, int dims,
                         const Eigen::VectorXd& w_true, double noise_std);

// Splits into device_count local datasets. Sample count not divisible by
// the slice arithmetic is truncated (a warning goes to stderr). Shard
// partitioning that cannot deal distinct labels (device_count >
// 2 * classes) raises ConfigError.
std::vector<Dataset> partition(const Dataset& data, int device_count,
                               const PartitionSpec& spec, std::mt19937_64& rng);

struct IdxParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads one big-endian IDX file. Image files (magic 0x00000803) fill
// features with pixels scaled to [0, 1], one flattened image per row;
// label files (magic 0x00000801) fill labels. Malformed input raises
// IdxParseError naming the offending byte offset.
Dataset load_idx(const std::string& path);

// Convenience pairing of an image file with its label file.
Dataset load_idx_pair(const std::string& images_path, const std::string& labels_path);

}  // namespace fedsched
