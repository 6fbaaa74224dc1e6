#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "orchnet/aggregation.hpp"
#include "orchnet/cloud.hpp"
#include "orchnet/extractor.hpp"

namespace orchnet {

enum class ExtractorKind { points, bev };

ExtractorKind parse_extractor_kind(const std::string& name);
std::string to_string(ExtractorKind kind);

struct ModelConfig {
  ExtractorKind extractor = ExtractorKind::points;
  HeadMode head = HeadMode::fusion;
  double crop_limit = 15.0;
  double input_scale = 1.0;  // point coordinates are multiplied by this before the MLP
  Index n_points = 1024;  // point path; the BEV path uses bev_points
  Index bev_points = 512;
  Index channels = 64;
  Index dim = 128;
  bool l2_normalize = false;

  /// Desk-scale defaults (1024 points, C = 64, K = 128).
  static ModelConfig desk();
  /// 20k points, C = 512, K = 2048.
  static ModelConfig paper_points();
  /// 256x256 BEV, C = 2048, S = 256, K = 512.
  static ModelConfig paper_bev();
};

/// Preprocessing, feature extraction and aggregation for one scan.
class Model {
 public:
  struct Cache {
    std::variant<PointExtractor::Cache, BevExtractor::Cache> extractor;
    OrchHead::Cache head;
  };

  explicit Model(const ModelConfig& config = {});

  /// Deterministic initialization: extractor, then aggregation heads, then
  /// fusion weights, all drawn from one generator seeded with `seed`.
  void init(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  OrchHead& head() { return head_; }
  const OrchHead& head() const { return head_; }

  /// Crop, downsample (seeded) and optionally yaw-augment a raw scan.
  PointCloud preprocess(const PointCloud& scan, std::uint64_t seed, bool augment) const;

  /// Descriptor of an already preprocessed cloud.
  Descriptor forward(const PointCloud& prepared, Cache* cache = nullptr) const;

  /// Descriptor of a raw scan.
  Descriptor describe(const PointCloud& scan, std::uint64_t seed, bool augment = false,
                      Cache* cache = nullptr) const;

  /// Accumulates parameter gradients of every stage.
  void backward(const Descriptor& upstream, const Cache& cache);

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  std::variant<PointExtractor, BevExtractor> extractor_;
  OrchHead head_;
};

}  // namespace orchnet
