#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orchnet/cloud.hpp"
#include "orchnet/dataset.hpp"

namespace orchnet {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double weight = 0.0;
};

using ParticleSet = std::vector<Particle>;

/// Relative motion expressed in the frame of the previous pose.
struct OdomDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

struct MotionNoise {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// A retrieved place: position of a mapped scan and its similarity to the
/// query. A NaN heading means the orientation is unknown.
struct LoopProposal {
  Pose2 pose;
  double similarity = 1.0;
};

double wrap_angle(double a);

OdomDelta relative_motion(const Pose2& from, const Pose2& to);
Pose2 compose(const Pose2& pose, const OdomDelta& delta);

/// Moves every particle by `delta` in its own frame plus Gaussian noise.
void predict(ParticleSet& particles, const OdomDelta& delta, const MotionNoise& noise, std::uint64_t seed);

struct LikelihoodConfig {
  int subsample = 50;   // keep every k-th scan point
  double sigma = 0.3;   // m
  double max_distance = std::numeric_limits<double>::infinity();
  double z_min = -std::numeric_limits<double>::infinity();  // sensor-frame height band of usable points
  double z_max = std::numeric_limits<double>::infinity();
};

/// exp(-d^2 / (2 sigma^2)) for a point at distance d from its nearest landmark.
double point_likelihood(double distance, const LikelihoodConfig& config);

double nearest_landmark_distance(const std::vector<Eigen::Vector2d>& landmarks, const Eigen::Vector2d& p);

/// Likelihood-field weight update followed by normalization. All-zero weights
/// are reset to uniform with a warning.
void update_weights(ParticleSet& particles, const PointCloud& scan, const std::vector<Eigen::Vector2d>& landmarks,
                    const LikelihoodConfig& config);

void normalize_weights(ParticleSet& particles);

struct ResampleConfig {
  double jitter_xy = 0.3;
  double jitter_heading = 0.05;
};

/// Per output slot a stratified draw picks between the particle set
/// (systematic resampling) and the proposals (multinomial over similarity).
/// Output weights are uniform.
ParticleSet resample_with_loops(const ParticleSet& particles, const std::vector<LoopProposal>& proposals,
                                double p_inject, std::uint64_t seed, const ResampleConfig& config = {});

Pose2 estimate_pose(const ParticleSet& particles);

// ---------------------------------------------------------------------------

struct OdometryModel {
  double scale_bias = 0.0;         // relative translation error
  double heading_bias = 0.0;       // rad added per metre travelled
  double trans_noise = 0.0;        // sigma per metre
  double rot_noise = 0.0;          // sigma per rad turned
};

struct LocalizationConfig {
  int particles = 500;
  MotionNoise init_spread{0.2, 0.2, 0.03};
  OdometryModel odometry{};
  // predict() noise is a + b * |motion|
  double motion_noise_xy = 0.03;
  double motion_noise_xy_per_m = 0.05;
  double motion_noise_heading = 0.01;
  double motion_noise_heading_per_rad = 0.05;
  LikelihoodConfig likelihood{};
  ResampleConfig resample{};
  double p_inject = 0.1;
  int proposals_per_query = 3;
  int exclude_window = 0;       // map entries with |i - t| <= window are not proposed
  double similarity_eps = 1e-6;
  std::uint64_t seed = 0;

  /// Biased odometry on top of a trunk-band likelihood field.
  static LocalizationConfig drift_preset();
};

struct LocalizationResult {
  std::vector<Pose2> estimate;
  std::vector<Pose2> truth;
  std::vector<Pose2> dead_reckoning;
  double rmse = 0.0;
  double rmse_first_third = 0.0;
  double rmse_final_third = 0.0;
};

struct LocalizationInput {
  const Sequence* sequence = nullptr;  // needs scans and headings
  const std::vector<Eigen::Vector2d>* landmarks = nullptr;
  /// One descriptor per entry, or empty to disable loop proposals.
  const std::vector<Descriptor>* descriptors = nullptr;
};

/// Per scan: predict with synthetic odometry, likelihood update, pose
/// estimate, then resampling with loop proposals retrieved from the
/// descriptors of the other mapped scans.
LocalizationResult run_localization(const LocalizationInput& input, const LocalizationConfig& config);

double rmse(const std::vector<Pose2>& a, const std::vector<Pose2>& b, std::size_t begin, std::size_t end);

std::string trajectory_csv(const LocalizationResult& result);
std::string trajectory_svg(const LocalizationResult& result, const std::vector<Eigen::Vector2d>& landmarks);

}  // namespace orchnet
