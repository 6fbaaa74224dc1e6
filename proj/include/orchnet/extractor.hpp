#pragma once

#include <vector>

#include "orchnet/cloud.hpp"
#include "orchnet/netcore.hpp"

namespace orchnet {

struct PointExtractorConfig {
  Index n_points = 1024;
  Index channels = 64;
  // Coordinates are multiplied by this before the first layer.
  double input_scale = 1.0;
};

/// Shared per-point MLP 3 -> 64 -> 128 -> C. Column s of the feature map is
/// the encoding of point s, so permuting points permutes columns.
class PointExtractor {
 public:
  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd pre1, act1, pre2, act2;
  };

  explicit PointExtractor(const PointExtractorConfig& config = {});

  void init(Rng& rng);
  const PointExtractorConfig& config() const { return config_; }

  /// Throws UsageError when the cloud does not have exactly `n_points` points.
  FeatureMap forward(const PointCloud& cloud, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients; returns d(loss)/d(points) as 3 x n.
  Eigen::Matrix3Xd backward(const FeatureMap& upstream, const Cache& cache);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  Linear layer1, layer2, layer3;

 private:
  PointExtractorConfig config_;
};

struct BevExtractorConfig {
  BevConfig bev{};
  Index grid = 16;  // patches per side; S = grid * grid
  Index hidden = 256;
  Index channels = 64;
  Index n_points = 512;
};

/// Tiles the BEV image into grid x grid patches and encodes each flattened
/// patch with a shared MLP (patch -> hidden -> C). Column s is patch s in
/// row-major order.
class BevExtractor {
 public:
  struct Cache {
    Eigen::MatrixXd patches;
    Eigen::MatrixXd pre1, act1;
  };

  explicit BevExtractor(const BevExtractorConfig& config = {});

  void init(Rng& rng);
  const BevExtractorConfig& config() const { return config_; }

  Index patch_rows() const { return config_.bev.height / config_.grid; }
  Index patch_cols() const { return config_.bev.width / config_.grid; }
  Index patch_size() const { return 3 * patch_rows() * patch_cols(); }

  /// Patch matrix (patch_size x grid^2). Flattening order inside a patch is
  /// channel (height, density, intensity), then row, then column.
  Eigen::MatrixXd patchify(const BevImage& bev) const;

  FeatureMap forward(const BevImage& bev, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients; returns the gradient w.r.t. the patch matrix.
  Eigen::MatrixXd backward(const FeatureMap& upstream, const Cache& cache);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  Linear layer1, layer2;

 private:
  BevExtractorConfig config_;
};

}  // namespace orchnet
