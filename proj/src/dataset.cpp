#include "orchnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "orchnet/csv.hpp"

namespace orchnet {

void Sequence::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].index != static_cast<int>(i) + 1) {
      throw DataError("sequence indices must run 1..N in order; entry " + std::to_string(i + 1) + " has index " +
                      std::to_string(entries[i].index));
    }
    if (!entries[i].pose.allFinite()) throw DataError("non-finite pose at index " + std::to_string(i + 1));
  }
  if (!scans.empty() && scans.size() != entries.size()) throw DataError("scan count differs from entry count");
  if (!headings.empty() && headings.size() != entries.size()) throw DataError("heading count differs from entry count");
}

Sequence Sequence::prefix(int last_index) const {
  const auto n = static_cast<std::size_t>(std::clamp<int>(last_index, 0, static_cast<int>(entries.size())));
  Sequence out;
  out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n));
  if (!scans.empty()) out.scans.assign(scans.begin(), scans.begin() + static_cast<std::ptrdiff_t>(n));
  if (!headings.empty()) out.headings.assign(headings.begin(), headings.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

bool LoopGroundTruth::is_positive(int anchor, int candidate) const {
  const auto it = positives.find(anchor);
  if (it == positives.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), candidate);
}

LoopGroundTruth build_ground_truth(const std::vector<SequenceEntry>& seq, double r_th, int gamma) {
  if (seq.empty()) throw DataError("cannot build ground truth for an empty sequence");
  if (!(r_th > 0.0)) throw UsageError("loop radius must be positive");
  if (gamma < 0) throw UsageError("gamma must be non-negative");
  for (const auto& e : seq) {
    if (!e.pose.allFinite()) throw DataError("non-finite pose at index " + std::to_string(e.index));
  }

  LoopGroundTruth gt;
  gt.r_th = r_th;
  gt.gamma = gamma;
  for (const auto& anchor : seq) {
    std::vector<int> pos;
    std::vector<int> neg;
    for (const auto& other : seq) {
      const double d = (other.pose - anchor.pose).norm();
      if (d >= r_th) {
        neg.push_back(other.index);
      } else if (other.row_id == anchor.row_id && other.index < anchor.index - gamma) {
        pos.push_back(other.index);
      }
    }
    if (!pos.empty()) {
      gt.anchors.push_back(anchor.index);
      gt.positives.emplace(anchor.index, std::move(pos));
      gt.negatives_pool.emplace(anchor.index, std::move(neg));
    }
  }
  return gt;
}

Triplet sample_triplet(const LoopGroundTruth& gt, const std::vector<SequenceEntry>& seq, int anchor, int n_neg,
                       std::uint64_t seed) {
  if (n_neg < 1) throw UsageError("at least one negative is required");
  const auto pit = gt.positives.find(anchor);
  if (pit == gt.positives.end()) throw UsageError("index " + std::to_string(anchor) + " is not an anchor");
  const auto& entry_of = [&](int index) -> const SequenceEntry& {
    return seq.at(static_cast<std::size_t>(index - 1));
  };
  const Eigen::Vector3d& pa = entry_of(anchor).pose;

  Triplet t;
  t.anchor = anchor;
  double best = std::numeric_limits<double>::infinity();
  for (int l : pit->second) {  // ascending, so strict < keeps the lowest index on ties
    const double d = (entry_of(l).pose - pa).norm();
    if (d < best) {
      best = d;
      t.positive = l;
    }
  }

  std::vector<int> pool = gt.negatives_pool.at(anchor);
  if (static_cast<int>(pool.size()) < n_neg) {
    std::cerr << "warning: anchor " << anchor << " has only " << pool.size() << " negatives, " << n_neg
              << " requested\n";
    t.negatives = pool;
    return t;
  }
  Rng rng(seed);
  for (int i = 0; i < n_neg; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
  }
  t.negatives.assign(pool.begin(), pool.begin() + n_neg);
  return t;
}

int split_index(const LoopGroundTruth& gt, double fraction) {
  if (gt.anchors.empty()) return 0;
  if (fraction >= 1.0) return gt.anchors.back();
  if (fraction <= 0.0) return 0;
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(gt.anchors.size())));
  if (n_train == 0) return 0;
  return gt.anchors[n_train - 1];
}

// ---------------------------------------------------------------------------

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  m.root = path.parent_path();
  const auto lines = csv::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "poses") m.poses = value;
    else if (key == "scans") m.scans = value;
    else if (key == "headings") m.headings = value;
    else if (key == "landmarks") m.landmarks = value;
    else if (key == "revisits") m.revisits = value;
    else throw DataError(path.string() + ": unknown manifest key '" + key + "'");
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::string out = "poses=" + m.poses + "\nscans=" + m.scans + "\n";
  if (!m.headings.empty()) out += "headings=" + m.headings + "\n";
  if (!m.landmarks.empty()) out += "landmarks=" + m.landmarks + "\n";
  if (!m.revisits.empty()) out += "revisits=" + m.revisits + "\n";
  csv::write_file(path, out);
}

std::string scan_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.csv", index);
  return buf;
}

std::vector<SequenceEntry> read_poses_csv(const std::filesystem::path& path, const std::filesystem::path& scan_dir) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "index,x,y,z,row_id") {
    throw DataError(path.string() + ": missing header 'index,x,y,z,row_id'");
  }
  std::vector<SequenceEntry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != 5) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected 5 fields");
    SequenceEntry e;
    e.index = static_cast<int>(csv::parse_int(f[0], "index"));
    e.pose = {csv::parse_double(f[1], "x"), csv::parse_double(f[2], "y"), csv::parse_double(f[3], "z")};
    e.row_id = static_cast<int>(csv::parse_int(f[4], "row_id"));
    e.scan_path = (scan_dir / scan_file_name(e.index)).string();
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_poses_csv(const std::filesystem::path& path, const std::vector<SequenceEntry>& entries) {
  std::string out = "index,x,y,z,row_id\n";
  for (const auto& e : entries) {
    out += std::to_string(e.index) + ',' + csv::format_double(e.pose.x()) + ',' + csv::format_double(e.pose.y()) +
           ',' + csv::format_double(e.pose.z()) + ',' + std::to_string(e.row_id) + '\n';
  }
  csv::write_file(path, out);
}

Sequence load_sequence(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  Sequence seq;
  seq.entries = read_poses_csv(m.resolve(m.poses), m.resolve(m.scans));
  seq.scans.reserve(seq.entries.size());
  for (const auto& e : seq.entries) seq.scans.push_back(read_scan_csv(e.scan_path));
  if (!m.headings.empty()) {
    const auto lines = csv::read_lines(m.resolve(m.headings));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = csv::split(lines[i]);
      if (f.size() != 2) throw DataError("headings file: expected 'index,heading'");
      seq.headings.push_back(csv::parse_double(f[1], "heading"));
    }
  }
  seq.validate();
  return seq;
}

std::vector<Eigen::Vector2d> read_landmarks_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || (i == 0 && lines[i] == "x,y")) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != 2) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected 'x,y'");
    out.emplace_back(csv::parse_double(f[0], "landmark x"), csv::parse_double(f[1], "landmark y"));
  }
  return out;
}

void write_landmarks_csv(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& landmarks) {
  std::string out = "x,y\n";
  for (const auto& l : landmarks) out += csv::format_double(l.x()) + ',' + csv::format_double(l.y()) + '\n';
  csv::write_file(path, out);
}

}  // namespace orchnet
