#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orchnet/netcore.hpp"

namespace orchnet {

template <typename Scalar>
using PooledT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kGemClamp = 1e-6;
inline constexpr double kGemPMin = 0.1;
inline constexpr double kGemPMax = 100.0;

// Pooling reduces the support axis (columns) and keeps channels (rows).

template <typename Derived>
PooledT<typename Derived::Scalar> mac_pool(const Eigen::MatrixBase<Derived>& z) {
  return z.rowwise().maxCoeff();
}

template <typename Derived>
PooledT<typename Derived::Scalar> spoc_pool(const Eigen::MatrixBase<Derived>& z) {
  return z.rowwise().mean();
}

/// Generalized mean with activations clamped to `eps` from below.
template <typename Derived>
PooledT<typename Derived::Scalar> gem_pool(const Eigen::MatrixBase<Derived>& z,
                                           typename Derived::Scalar p,
                                           typename Derived::Scalar eps = kGemClamp) {
  using Scalar = typename Derived::Scalar;
  const auto powered = z.derived().array().max(eps).pow(p);
  return powered.rowwise().mean().pow(Scalar(1) / p).matrix();
}

/// Gradient of mac_pool; each row routes to its first maximal column.
Eigen::MatrixXd mac_pool_backward(const Eigen::VectorXd& upstream, const FeatureMap& z);

Eigen::MatrixXd spoc_pool_backward(const Eigen::VectorXd& upstream, Index support);

struct GemGrads {
  Eigen::MatrixXd z;
  double p = 0.0;
};

/// `pooled` is the forward output gem_pool(z, p, eps).
GemGrads gem_pool_backward(const Eigen::VectorXd& upstream, const FeatureMap& z, double p,
                           const Eigen::VectorXd& pooled, double eps = kGemClamp);

/// Linear projection C -> K with no activation.
Descriptor head_project(const Eigen::VectorXd& pooled, const Linear& head);

/// out = a1 * dm + a2 * ds + a3 * dg.
Descriptor fuse(const Descriptor& dm, const Descriptor& ds, const Descriptor& dg, const Eigen::Vector3d& a);

enum class HeadMode { fusion, mac, spoc, gem };

HeadMode parse_head_mode(const std::string& name);
std::string to_string(HeadMode mode);

struct AggregationConfig {
  Index channels = 64;
  Index dim = 128;
  HeadMode mode = HeadMode::fusion;
  double gem_p_init = 3.0;
  double fusion_init_sigma = 0.1;
  bool l2_normalize = false;
};

/// MAC, SPoC and GeM pooling, one linear head per pooling, and the trainable
/// weighted fusion of the three head descriptors.
class OrchHead {
 public:
  struct Cache {
    FeatureMap z;
    Eigen::VectorXd pooled_mac, pooled_spoc, pooled_gem;
    Descriptor d_mac, d_spoc, d_gem;
    Descriptor raw;  // before optional normalization
    bool valid = false;
  };

  explicit OrchHead(const AggregationConfig& config = {});

  /// Heads first, then fusion weights from N(0, sigma); p set to its init value.
  void init(Rng& rng);

  const AggregationConfig& config() const { return config_; }
  HeadMode mode() const { return config_.mode; }
  void set_mode(HeadMode mode) { config_.mode = mode; }

  double gem_p() const { return gem_p_.values(0, 0); }
  void set_gem_p(double p) { gem_p_.values(0, 0) = p; }
  Eigen::Vector3d fusion_weights() const { return fusion_.values.col(0); }
  void set_fusion_weights(const Eigen::Vector3d& a) { fusion_.values.col(0) = a; }

  Descriptor forward(const FeatureMap& z, Cache* cache = nullptr) const;

  /// Accumulates gradients for heads, fusion weights and p; returns d/dZ.
  /// Throws UsageError when the cache was not produced by forward().
  FeatureMap backward(const Descriptor& upstream, const Cache& cache);

  /// Keeps p inside [kGemPMin, kGemPMax]; call after every optimizer step.
  void clamp_gem_p();

  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  ParamTensor& fusion_param() { return fusion_; }
  ParamTensor& gem_p_param() { return gem_p_; }

  Linear mac_head, spoc_head, gem_head;

 private:
  AggregationConfig config_;
  ParamTensor fusion_;
  ParamTensor gem_p_;
};

}  // namespace orchnet
