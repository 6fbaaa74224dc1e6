#include "orchnet/aggregation.hpp"

#include <algorithm>

namespace orchnet {

Eigen::MatrixXd mac_pool_backward(const Eigen::VectorXd& upstream, const FeatureMap& z) {
  if (upstream.size() != z.rows()) throw UsageError("mac_pool_backward: shape mismatch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (Index c = 0; c < z.rows(); ++c) {
    Index arg = 0;
    z.row(c).maxCoeff(&arg);  // first maximal index
    g(c, arg) = upstream(c);
  }
  return g;
}

Eigen::MatrixXd spoc_pool_backward(const Eigen::VectorXd& upstream, Index support) {
  if (support < 1) throw UsageError("spoc_pool_backward: empty support");
  return upstream.replicate(1, support) / static_cast<double>(support);
}

GemGrads gem_pool_backward(const Eigen::VectorXd& upstream, const FeatureMap& z, double p,
                           const Eigen::VectorXd& pooled, double eps) {
  if (upstream.size() != z.rows() || pooled.size() != z.rows()) {
    throw UsageError("gem_pool_backward: shape mismatch");
  }
  const auto s = static_cast<double>(z.cols());
  GemGrads g;
  g.z = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (Index c = 0; c < z.rows(); ++c) {
    const double out = pooled(c);
    const double mean_pow = std::pow(out, p);  // (1/S) sum x^p
    double weighted_log = 0.0;                 // (1/S) sum x^p ln x
    for (Index j = 0; j < z.cols(); ++j) {
      const double x = std::max(z(c, j), eps);
      const double xp = std::pow(x, p);
      weighted_log += xp * std::log(x);
      if (z(c, j) > eps) {
        // d out / d x = out^(1-p) x^(p-1) / S
        g.z(c, j) = upstream(c) * std::pow(out, 1.0 - p) * std::pow(x, p - 1.0) / s;
      }
    }
    weighted_log /= s;
    // d out / d p = out * (-ln(M) / p^2 + (sum x^p ln x / S) / (p M))
    const double dp = out * (-std::log(mean_pow) / (p * p) + weighted_log / (p * mean_pow));
    g.p += upstream(c) * dp;
  }
  return g;
}

Descriptor head_project(const Eigen::VectorXd& pooled, const Linear& head) {
  if (pooled.size() != head.in_features()) throw UsageError("head_project: shape mismatch");
  return head.forward(pooled).col(0);
}

Descriptor fuse(const Descriptor& dm, const Descriptor& ds, const Descriptor& dg, const Eigen::Vector3d& a) {
  if (dm.size() != ds.size() || dm.size() != dg.size()) throw UsageError("fuse: descriptor dimension mismatch");
  return a(0) * dm + a(1) * ds + a(2) * dg;
}

HeadMode parse_head_mode(const std::string& name) {
  if (name == "fusion") return HeadMode::fusion;
  if (name == "mac") return HeadMode::mac;
  if (name == "spoc") return HeadMode::spoc;
  if (name == "gem") return HeadMode::gem;
  throw UsageError("unknown head mode '" + name + "' (expected fusion|mac|spoc|gem)");
}

std::string to_string(HeadMode mode) {
  switch (mode) {
    case HeadMode::fusion: return "fusion";
    case HeadMode::mac: return "mac";
    case HeadMode::spoc: return "spoc";
    case HeadMode::gem: return "gem";
  }
  return "fusion";
}

OrchHead::OrchHead(const AggregationConfig& config)
    : mac_head("head.mac", config.channels, config.dim),
      spoc_head("head.spoc", config.channels, config.dim),
      gem_head("head.gem", config.channels, config.dim),
      config_(config),
      fusion_("head.fusion", 3, 1, true),
      gem_p_("head.gem_p", 1, 1, true) {
  if (config.channels < 1 || config.dim < 1) throw UsageError("aggregation needs channels, dim >= 1");
  gem_p_.values(0, 0) = config.gem_p_init;
  fusion_.values.setConstant(1.0 / 3.0);
}

void OrchHead::init(Rng& rng) {
  mac_head.init_he_uniform(rng);
  spoc_head.init_he_uniform(rng);
  gem_head.init_he_uniform(rng);
  std::normal_distribution<double> normal(0.0, config_.fusion_init_sigma);
  for (Index i = 0; i < 3; ++i) fusion_.values(i, 0) = normal(rng);
  gem_p_.values(0, 0) = config_.gem_p_init;
}

Descriptor OrchHead::forward(const FeatureMap& z, Cache* cache) const {
  if (z.rows() != config_.channels || z.cols() < 1) {
    throw UsageError("aggregation expects a " + std::to_string(config_.channels) + " x S feature map");
  }
  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  c = Cache{};
  const bool need_mac = config_.mode == HeadMode::fusion || config_.mode == HeadMode::mac;
  const bool need_spoc = config_.mode == HeadMode::fusion || config_.mode == HeadMode::spoc;
  const bool need_gem = config_.mode == HeadMode::fusion || config_.mode == HeadMode::gem;
  if (need_mac) {
    c.pooled_mac = mac_pool(z);
    c.d_mac = head_project(c.pooled_mac, mac_head);
  }
  if (need_spoc) {
    c.pooled_spoc = spoc_pool(z);
    c.d_spoc = head_project(c.pooled_spoc, spoc_head);
  }
  if (need_gem) {
    c.pooled_gem = gem_pool(z, gem_p());
    c.d_gem = head_project(c.pooled_gem, gem_head);
  }
  switch (config_.mode) {
    case HeadMode::fusion: c.raw = fuse(c.d_mac, c.d_spoc, c.d_gem, fusion_weights()); break;
    case HeadMode::mac: c.raw = c.d_mac; break;
    case HeadMode::spoc: c.raw = c.d_spoc; break;
    case HeadMode::gem: c.raw = c.d_gem; break;
  }
  if (cache != nullptr) {
    c.z = z;
    c.valid = true;
  }
  if (config_.l2_normalize) {
    const double n = c.raw.norm();
    return n > 0.0 ? Descriptor(c.raw / n) : c.raw;
  }
  return c.raw;
}

FeatureMap OrchHead::backward(const Descriptor& upstream_out, const Cache& cache) {
  if (!cache.valid) throw UsageError("aggregation backward called without a forward cache");
  if (upstream_out.size() != config_.dim) throw UsageError("aggregation backward: descriptor gradient has wrong size");

  Descriptor upstream = upstream_out;
  if (config_.l2_normalize) {
    const double n = cache.raw.norm();
    if (n > 0.0) {
      const Descriptor u = cache.raw / n;
      upstream = (upstream_out - u * u.dot(upstream_out)) / n;
    }
  }

  const FeatureMap& z = cache.z;
  FeatureMap dz = FeatureMap::Zero(z.rows(), z.cols());
  const Eigen::Vector3d a = fusion_weights();

  auto route = [&](double scale, bool active) { return active ? Descriptor(scale * upstream) : Descriptor(); };
  Descriptor g_mac, g_spoc, g_gem;
  switch (config_.mode) {
    case HeadMode::fusion:
      fusion_.grads(0, 0) += upstream.dot(cache.d_mac);
      fusion_.grads(1, 0) += upstream.dot(cache.d_spoc);
      fusion_.grads(2, 0) += upstream.dot(cache.d_gem);
      g_mac = route(a(0), true);
      g_spoc = route(a(1), true);
      g_gem = route(a(2), true);
      break;
    case HeadMode::mac: g_mac = upstream; break;
    case HeadMode::spoc: g_spoc = upstream; break;
    case HeadMode::gem: g_gem = upstream; break;
  }

  if (g_mac.size() > 0) {
    const Eigen::VectorXd g_pool = mac_head.backward(g_mac, cache.pooled_mac).col(0);
    dz += mac_pool_backward(g_pool, z);
  }
  if (g_spoc.size() > 0) {
    const Eigen::VectorXd g_pool = spoc_head.backward(g_spoc, cache.pooled_spoc).col(0);
    dz += spoc_pool_backward(g_pool, z.cols());
  }
  if (g_gem.size() > 0) {
    const Eigen::VectorXd g_pool = gem_head.backward(g_gem, cache.pooled_gem).col(0);
    const GemGrads gg = gem_pool_backward(g_pool, z, gem_p(), cache.pooled_gem);
    dz += gg.z;
    gem_p_.grads(0, 0) += gg.p;
  }
  return dz;
}

void OrchHead::clamp_gem_p() {
  gem_p_.values(0, 0) = std::clamp(gem_p_.values(0, 0), kGemPMin, kGemPMax);
}

std::vector<ParamTensor*> OrchHead::parameters() {
  return {&mac_head.weight, &mac_head.bias, &spoc_head.weight, &spoc_head.bias,
          &gem_head.weight, &gem_head.bias, &fusion_,           &gem_p_};
}

std::vector<const ParamTensor*> OrchHead::parameters() const {
  return {&mac_head.weight, &mac_head.bias, &spoc_head.weight, &spoc_head.bias,
          &gem_head.weight, &gem_head.bias, &fusion_,           &gem_p_};
}

}  // namespace orchnet
