#include "orchnet/extractor.hpp"

#include <string>

namespace orchnet {

PointExtractor::PointExtractor(const PointExtractorConfig& config)
    : layer1("points.fc1", 3, 64),
      layer2("points.fc2", 64, 128),
      layer3("points.fc3", 128, config.channels),
      config_(config) {
  if (config.n_points < 1 || config.channels < 1) throw UsageError("point extractor needs n_points, channels >= 1");
}

void PointExtractor::init(Rng& rng) {
  layer1.init_he_uniform(rng);
  layer2.init_he_uniform(rng);
  layer3.init_he_uniform(rng);
}

FeatureMap PointExtractor::forward(const PointCloud& cloud, Cache* cache) const {
  if (cloud.size() != config_.n_points) {
    throw UsageError("point extractor expects " + std::to_string(config_.n_points) + " points, got " +
                     std::to_string(cloud.size()));
  }
  Eigen::MatrixXd input = cloud.points * config_.input_scale;
  Eigen::MatrixXd pre1 = layer1.forward(input);
  Eigen::MatrixXd act1 = relu(pre1);
  Eigen::MatrixXd pre2 = layer2.forward(act1);
  Eigen::MatrixXd act2 = relu(pre2);
  FeatureMap out = layer3.forward(act2);
  if (cache != nullptr) {
    cache->input = std::move(input);
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->pre2 = std::move(pre2);
    cache->act2 = std::move(act2);
  }
  return out;
}

Eigen::Matrix3Xd PointExtractor::backward(const FeatureMap& upstream, const Cache& cache) {
  if (cache.input.cols() == 0) throw UsageError("point extractor backward without a forward cache");
  if (upstream.rows() != config_.channels || upstream.cols() != cache.input.cols()) {
    throw UsageError("point extractor backward: upstream shape mismatch");
  }
  Eigen::MatrixXd g = layer3.backward(upstream, cache.act2);
  g = relu_backward(g, cache.pre2);
  g = layer2.backward(g, cache.act1);
  g = relu_backward(g, cache.pre1);
  g = layer1.backward(g, cache.input);
  return g * config_.input_scale;
}

std::vector<ParamTensor*> PointExtractor::parameters() {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias, &layer3.weight, &layer3.bias};
}

std::vector<const ParamTensor*> PointExtractor::parameters() const {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias, &layer3.weight, &layer3.bias};
}

BevExtractor::BevExtractor(const BevExtractorConfig& config) : config_(config) {
  if (config.grid < 1 || config.bev.height % config.grid != 0 || config.bev.width % config.grid != 0) {
    throw UsageError("BEV dimensions " + std::to_string(config.bev.height) + "x" +
                     std::to_string(config.bev.width) + " are not divisible into a " +
                     std::to_string(config.grid) + "x" + std::to_string(config.grid) + " patch grid");
  }
  layer1 = Linear("bev.fc1", patch_size(), config.hidden);
  layer2 = Linear("bev.fc2", config.hidden, config.channels);
}

void BevExtractor::init(Rng& rng) {
  layer1.init_he_uniform(rng);
  layer2.init_he_uniform(rng);
}

Eigen::MatrixXd BevExtractor::patchify(const BevImage& bev) const {
  if (bev.rows() != config_.bev.height || bev.cols() != config_.bev.width) {
    throw UsageError("BEV image is " + std::to_string(bev.rows()) + "x" + std::to_string(bev.cols()) +
                     ", extractor expects " + std::to_string(config_.bev.height) + "x" +
                     std::to_string(config_.bev.width));
  }
  const Index ph = patch_rows();
  const Index pw = patch_cols();
  const Index g = config_.grid;
  Eigen::MatrixXd patches(patch_size(), g * g);
  const Eigen::MatrixXd* channels[3] = {&bev.height_ch, &bev.density_ch, &bev.intensity_ch};
  for (Index pr = 0; pr < g; ++pr) {
    for (Index pc = 0; pc < g; ++pc) {
      const Index s = pr * g + pc;
      Index k = 0;
      for (const Eigen::MatrixXd* ch : channels) {
        for (Index r = 0; r < ph; ++r) {
          for (Index c = 0; c < pw; ++c) patches(k++, s) = (*ch)(pr * ph + r, pc * pw + c);
        }
      }
    }
  }
  return patches;
}

FeatureMap BevExtractor::forward(const BevImage& bev, Cache* cache) const {
  Eigen::MatrixXd patches = patchify(bev);
  Eigen::MatrixXd pre1 = layer1.forward(patches);
  Eigen::MatrixXd act1 = relu(pre1);
  FeatureMap out = layer2.forward(act1);
  if (cache != nullptr) {
    cache->patches = std::move(patches);
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
  }
  return out;
}

Eigen::MatrixXd BevExtractor::backward(const FeatureMap& upstream, const Cache& cache) {
  if (cache.patches.cols() == 0) throw UsageError("BEV extractor backward without a forward cache");
  if (upstream.rows() != config_.channels || upstream.cols() != cache.patches.cols()) {
    throw UsageError("BEV extractor backward: upstream shape mismatch");
  }
  Eigen::MatrixXd g = layer2.backward(upstream, cache.act1);
  g = relu_backward(g, cache.pre1);
  return layer1.backward(g, cache.patches);
}

std::vector<ParamTensor*> BevExtractor::parameters() {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias};
}

std::vector<const ParamTensor*> BevExtractor::parameters() const {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias};
}

}  // namespace orchnet
