#include "orchnet/model.hpp"

namespace orchnet {

ExtractorKind parse_extractor_kind(const std::string& name) {
  if (name == "points") return ExtractorKind::points;
  if (name == "bev") return ExtractorKind::bev;
  throw UsageError("unknown extractor '" + name + "' (expected points|bev)");
}

std::string to_string(ExtractorKind kind) { return kind == ExtractorKind::bev ? "bev" : "points"; }

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_points() {
  ModelConfig c;
  c.n_points = 20000;
  c.channels = 512;
  c.dim = 2048;
  return c;
}

ModelConfig ModelConfig::paper_bev() {
  ModelConfig c;
  c.extractor = ExtractorKind::bev;
  c.bev_points = 512;
  c.channels = 2048;
  c.dim = 512;
  return c;
}

namespace {

std::variant<PointExtractor, BevExtractor> make_extractor(const ModelConfig& config) {
  if (config.extractor == ExtractorKind::bev) {
    BevExtractorConfig bc;
    bc.bev.extent = config.crop_limit;
    bc.channels = config.channels;
    bc.n_points = config.bev_points;
    return BevExtractor(bc);
  }
  PointExtractorConfig pc;
  pc.n_points = config.n_points;
  pc.channels = config.channels;
  pc.input_scale = config.input_scale;
  return PointExtractor(pc);
}

AggregationConfig make_aggregation(const ModelConfig& config) {
  AggregationConfig ac;
  ac.channels = config.channels;
  ac.dim = config.dim;
  ac.mode = config.head;
  ac.l2_normalize = config.l2_normalize;
  return ac;
}

}  // namespace

Model::Model(const ModelConfig& config)
    : config_(config), extractor_(make_extractor(config)), head_(make_aggregation(config)) {
  if (!(config.crop_limit > 0.0)) throw UsageError("crop limit must be positive");
}

void Model::init(std::uint64_t seed) {
  Rng rng(seed);
  std::visit([&](auto& e) { e.init(rng); }, extractor_);
  head_.init(rng);
}

PointCloud Model::preprocess(const PointCloud& scan, std::uint64_t seed, bool augment) const {
  PointCloud cloud = crop_xy(scan, config_.crop_limit);
  if (cloud.empty()) throw DataError("scan is empty after cropping");
  const Index n = config_.extractor == ExtractorKind::bev ? config_.bev_points : config_.n_points;
  cloud = random_downsample(cloud, n, mix_seed(seed, 1));
  if (augment) cloud = random_yaw_augment(cloud, mix_seed(seed, 2));
  return cloud;
}

Descriptor Model::forward(const PointCloud& prepared, Cache* cache) const {
  if (config_.extractor == ExtractorKind::bev) {
    const auto& ex = std::get<BevExtractor>(extractor_);
    const BevImage bev = project_bev(prepared, ex.config().bev);
    if (cache == nullptr) return head_.forward(ex.forward(bev));
    auto& ec = cache->extractor.emplace<BevExtractor::Cache>();
    return head_.forward(ex.forward(bev, &ec), &cache->head);
  }
  const auto& ex = std::get<PointExtractor>(extractor_);
  if (cache == nullptr) return head_.forward(ex.forward(prepared));
  auto& ec = cache->extractor.emplace<PointExtractor::Cache>();
  return head_.forward(ex.forward(prepared, &ec), &cache->head);
}

Descriptor Model::describe(const PointCloud& scan, std::uint64_t seed, bool augment, Cache* cache) const {
  return forward(preprocess(scan, seed, augment), cache);
}

void Model::backward(const Descriptor& upstream, const Cache& cache) {
  const FeatureMap dz = head_.backward(upstream, cache.head);
  if (config_.extractor == ExtractorKind::bev) {
    std::get<BevExtractor>(extractor_).backward(dz, std::get<BevExtractor::Cache>(cache.extractor));
  } else {
    std::get<PointExtractor>(extractor_).backward(dz, std::get<PointExtractor::Cache>(cache.extractor));
  }
}

std::vector<ParamTensor*> Model::parameters() {
  std::vector<ParamTensor*> out = std::visit([](auto& e) { return e.parameters(); }, extractor_);
  for (ParamTensor* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ParamTensor*> Model::parameters() const {
  std::vector<const ParamTensor*> out =
      std::visit([](const auto& e) { return e.parameters(); }, extractor_);
  for (const ParamTensor* p : head_.parameters()) out.push_back(p);
  return out;
}

void Model::save(const std::filesystem::path& path) const { save_checkpoint(path, parameters()); }

void Model::load(const std::filesystem::path& path) { load_checkpoint(path, parameters()); }

}  // namespace orchnet
