#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orchnet/common.hpp"

namespace orchnet {

/// A named trainable tensor. Values are stored as a matrix; `shape` records
/// the declared rank (1 for biases and scalars, 2 for weights).
struct ParamTensor {
  std::string name;
  std::vector<Index> shape;
  Eigen::MatrixXd values;
  Eigen::MatrixXd grads;

  ParamTensor() = default;
  ParamTensor(std::string n, Index rows, Index cols, bool vector_shape = false);

  void zero_grad() { grads.setZero(); }
};

// ---------------------------------------------------------------------------
// Dense layer: out = W x + b, applied column-wise over the support axis.

template <typename DerivedX, typename DerivedW, typename DerivedB>
Eigen::MatrixXd linear_forward(const Eigen::MatrixBase<DerivedX>& x,
                               const Eigen::MatrixBase<DerivedW>& w,
                               const Eigen::MatrixBase<DerivedB>& b) {
  if (w.cols() != x.rows() || b.size() != w.rows()) {
    throw UsageError("linear_forward: shape mismatch");
  }
  Eigen::MatrixXd out = w * x;
  out.colwise() += b.derived().reshaped();
  return out;
}

struct LinearGrads {
  Eigen::MatrixXd x;
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

template <typename DerivedU, typename DerivedX, typename DerivedW>
LinearGrads linear_backward(const Eigen::MatrixBase<DerivedU>& upstream,
                            const Eigen::MatrixBase<DerivedX>& x,
                            const Eigen::MatrixBase<DerivedW>& w) {
  if (upstream.rows() != w.rows() || upstream.cols() != x.cols() || w.cols() != x.rows()) {
    throw UsageError("linear_backward: shape mismatch");
  }
  LinearGrads g;
  g.x = w.transpose() * upstream;
  g.w = upstream * x.transpose();
  g.b = upstream.rowwise().sum();
  return g;
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Masks `upstream` where the forward input was <= 0.
template <typename DerivedU, typename DerivedX>
Eigen::MatrixXd relu_backward(const Eigen::MatrixBase<DerivedU>& upstream,
                              const Eigen::MatrixBase<DerivedX>& x) {
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw UsageError("relu_backward: shape mismatch");
  }
  return (x.array() > 0.0).select(upstream, 0.0);
}

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Index in, Index out);

  Index in_features() const { return weight.values.cols(); }
  Index out_features() const { return weight.values.rows(); }

  /// He-uniform weights, zero bias.
  void init_he_uniform(Rng& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    return linear_forward(x, weight.values, bias.values);
  }

  /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& x);

  ParamTensor weight;
  ParamTensor bias;
};

// ---------------------------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay and bias correction.
class AdamW {
 public:
  AdamW(std::vector<ParamTensor*> params, AdamWConfig config = {});

  /// Applies one update to every parameter, then zeroes the gradients.
  /// Throws NumericError naming the first parameter with a non-finite gradient.
  void step();

  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  std::vector<ParamTensor*> params_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  AdamWConfig config_;
  std::int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint format: "ORNN", u32 version, then per parameter
// (u32 name length, name, u32 rank, u32 dims[rank], f64 values row-major).

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::vector<const ParamTensor*>& params);

/// Loads values by name into `params`. Every parameter must be present with a matching shape.
void load_checkpoint(const std::filesystem::path& path, const std::vector<ParamTensor*>& params);

}  // namespace orchnet
