#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orchnet/dataset.hpp"

namespace orchnet {

struct OrchardSpec {
  int n_rows = 3;             // driven corridors
  int border_lines = 4;       // undriven tree lines beyond each outer corridor
  double row_spacing = 3.0;   // m between tree lines
  double tree_spacing = 1.5;  // m between trees in a line
  int trees_per_row = 40;
  double missing_tree_prob = 0.12;
  int block_length = 8;         // trees per planting block along a line
  double vigor_spread = 0.5;    // block size factor drawn from 1 +- vigor_spread
  double canopy_density = 20.0;  // mean canopy returns per tree (season knob)
  double canopy_scale = 1.0;     // canopy radius multiplier (season knob)
  double trunk_points = 6.0;     // mean trunk returns per tree
  double ground_points = 250.0;  // mean ground returns per scan
  int points_per_scan = 8000;    // hard cap on returns per scan
  double noise_sigma = 0.02;     // m, isotropic range noise
  double sensor_range = 15.0;
  double sensor_height = 0.8;
  double scan_step = 2.0;  // m travelled between recorded scans
  double path_lateral_sigma = 0.1;
  double path_heading_sigma = 0.03;
  double r_th = kDefaultLoopRadius;
  int gamma = kDefaultGamma;
  std::uint64_t seed = 1;

  /// Throws UsageError on non-positive counts or spacings.
  void validate() const;

  /// Dense canopy, single revisits (July-like).
  static OrchardSpec summer_like();
  /// Half the canopy returns, smaller crowns (November-like).
  static OrchardSpec autumn_like();
  /// Scales densities and orchard size towards tens of thousands of points per scan.
  OrchardSpec paper_scale() const;
};

enum class PathPlan { single_revisit, multi_revisit };

PathPlan parse_path_plan(const std::string& name);
std::string to_string(PathPlan plan);

struct Tree {
  Eigen::Vector2d position;
  double trunk_height = 0.0;
  double trunk_radius = 0.0;
  double canopy_radius = 0.0;
  int line = 0;
};

struct SyntheticSequence {
  Sequence sequence;                              // entries, scans, headings
  std::vector<std::pair<int, int>> revisit_log;  // (anchor, earlier positive), sorted
  std::vector<Eigen::Vector2d> landmarks;         // trunk positions
  std::vector<Tree> trees;
  std::vector<int> pass_of;  // pass number of each entry
  std::vector<int> pass_row;  // corridor of each pass
};

/// Deterministic orchard sequence: trees on a jittered grid, a robot path
/// through the corridors, one range-gated scan per `scan_step` metres.
SyntheticSequence generate(const OrchardSpec& spec, PathPlan plan);

/// Corridor visiting order for a plan.
std::vector<int> corridor_passes(int n_rows, PathPlan plan);

/// Indices of trees whose trunks lie within sensor range of `position`.
std::vector<int> visible_trees(const SyntheticSequence& synth, const Eigen::Vector2d& position, double range);

/// Expected number of returns for a scan at `position` before the cap.
double expected_points(const OrchardSpec& spec, const std::vector<Tree>& trees, const Eigen::Vector2d& position);

/// Embeds the pose (x, y, z) into `dim` dimensions, zero padded.
Descriptor oracle_descriptor(const SequenceEntry& entry, Index dim);

/// Writes manifest.txt, poses.csv, headings.csv, landmarks.csv, revisits.csv and scans/.
std::filesystem::path write_synthetic(const std::filesystem::path& dir, const SyntheticSequence& synth);

std::vector<std::pair<int, int>> read_revisits_csv(const std::filesystem::path& path);

}  // namespace orchnet
