#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orchnet/cloud.hpp"

namespace orchnet {

struct SequenceEntry {
  int index = 0;  // 1-based, contiguous
  std::string scan_path;
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();
  int row_id = 0;
};

/// Entries plus their scans (same order) and, when known, the sensor headings.
struct Sequence {
  std::vector<SequenceEntry> entries;
  std::vector<PointCloud> scans;
  std::vector<double> headings;

  std::size_t size() const { return entries.size(); }
  /// Position of entry `index` (1-based) in the vectors.
  std::size_t slot(int index) const { return static_cast<std::size_t>(index - 1); }
  const SequenceEntry& entry(int index) const { return entries.at(slot(index)); }
  const PointCloud& scan(int index) const { return scans.at(slot(index)); }

  /// Throws DataError unless indices run 1..N in order and poses are finite.
  void validate() const;

  /// Entries with index <= last_index.
  Sequence prefix(int last_index) const;
};

inline constexpr double kDefaultLoopRadius = 10.0;
inline constexpr int kDefaultGamma = 50;

struct LoopGroundTruth {
  std::vector<int> anchors;
  std::map<int, std::vector<int>> positives;
  std::map<int, std::vector<int>> negatives_pool;
  double r_th = kDefaultLoopRadius;
  int gamma = kDefaultGamma;

  bool is_anchor(int index) const { return positives.count(index) > 0; }
  bool is_positive(int anchor, int candidate) const;
};

/// Loop ground truth. Positives of j are earlier entries l < j - gamma within
/// r_th of j on the same row; anchors are entries with at least one positive;
/// negatives of j are all entries at distance >= r_th.
LoopGroundTruth build_ground_truth(const std::vector<SequenceEntry>& seq, double r_th = kDefaultLoopRadius,
                                   int gamma = kDefaultGamma);

struct Triplet {
  int anchor = 0;
  int positive = 0;
  std::vector<int> negatives;
};

/// Closest positive in pose space (ties: lowest index) and `n_neg` negatives
/// drawn uniformly without replacement. A pool smaller than `n_neg` is used
/// whole with a warning on stderr.
Triplet sample_triplet(const LoopGroundTruth& gt, const std::vector<SequenceEntry>& seq, int anchor, int n_neg,
                       std::uint64_t seed);

/// Index of the last entry belonging to the first `fraction` of anchors
/// (sequence order). Entries up to it form the training split.
int split_index(const LoopGroundTruth& gt, double fraction);

// ---------------------------------------------------------------------------
// On-disk layout: a `key=value` manifest naming the pose CSV
// (`index,x,y,z,row_id` with header), the scan directory (one `%06d.csv` per
// entry), and optionally headings, landmarks and the generator's revisit log.

struct Manifest {
  std::filesystem::path root;
  std::string poses = "poses.csv";
  std::string scans = "scans";
  std::string headings;
  std::string landmarks;
  std::string revisits;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

std::string scan_file_name(int index);

std::vector<SequenceEntry> read_poses_csv(const std::filesystem::path& path, const std::filesystem::path& scan_dir);
void write_poses_csv(const std::filesystem::path& path, const std::vector<SequenceEntry>& entries);

/// Loads the entries, every scan and (if listed) the headings.
Sequence load_sequence(const std::filesystem::path& manifest_path);

std::vector<Eigen::Vector2d> read_landmarks_csv(const std::filesystem::path& path);
void write_landmarks_csv(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& landmarks);

}  // namespace orchnet
