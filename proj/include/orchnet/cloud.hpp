#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include <Eigen/Core>

#include "orchnet/common.hpp"

namespace orchnet {

/// A LiDAR scan: one column per point plus a per-point intensity in [0, 1].
struct PointCloud {
  Eigen::Matrix3Xd points;
  Eigen::VectorXd intensity;

  PointCloud() = default;
  PointCloud(Eigen::Matrix3Xd pts, Eigen::VectorXd inten);

  Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }

  /// Throws DataError when the point/intensity lengths differ or a coordinate is not finite.
  void validate() const;
};

struct BevConfig {
  Index height = 256;
  Index width = 256;
  double extent = 15.0;  // grid covers [-extent, extent] in x and y
  double z_min = -2.0;
  double z_max = 5.0;
  double density_saturation = 10.0;
};

struct BevImage {
  Eigen::MatrixXd height_ch;
  Eigen::MatrixXd density_ch;
  Eigen::MatrixXd intensity_ch;
  double extent = 0.0;

  Index rows() const { return height_ch.rows(); }
  Index cols() const { return height_ch.cols(); }
};

/// Keeps points with |x| <= limit and |y| <= limit, preserving order.
PointCloud crop_xy(const PointCloud& cloud, double limit);

/// Draws exactly `n_target` points. Larger clouds are sampled without
/// replacement; smaller clouds keep every point once and are topped up by
/// sampling with replacement.
PointCloud random_downsample(const PointCloud& cloud, Index n_target, std::uint64_t seed);

/// Rigid rotation about the z axis.
PointCloud rotate_yaw(const PointCloud& cloud, double angle);

/// Draws an angle uniformly from (-pi, pi].
double draw_yaw(std::uint64_t seed);

PointCloud random_yaw_augment(const PointCloud& cloud, std::uint64_t seed);

/// Bird's-eye-view projection into height, density and intensity channels.
BevImage project_bev(const PointCloud& cloud, const BevConfig& config = {});

/// Scan files hold one `x,y,z,intensity` record per line.
PointCloud read_scan_csv(const std::filesystem::path& path);
void write_scan_csv(const std::filesystem::path& path, const PointCloud& cloud);

/// Rotation about z, usable on any 3xN Eigen expression.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> yaw_rotation(Scalar angle) {
  using std::cos;
  using std::sin;
  Eigen::Matrix<Scalar, 3, 3> r;
  r << cos(angle), -sin(angle), Scalar(0),
       sin(angle), cos(angle), Scalar(0),
       Scalar(0), Scalar(0), Scalar(1);
  return r;
}

}  // namespace orchnet
