#include "orchnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "orchnet/csv.hpp"

namespace orchnet {

void OrchardSpec::validate() const {
  if (n_rows < 1 || trees_per_row < 1 || points_per_scan < 1 || border_lines < 0) throw UsageError("orchard counts must be >= 1");
  if (!(row_spacing > 0.0) || !(tree_spacing > 0.0) || !(scan_step > 0.0) || !(sensor_range > 0.0)) {
    throw UsageError("orchard spacings and sensor range must be positive");
  }
  if (canopy_density < 0.0 || trunk_points < 0.0 || ground_points < 0.0 || noise_sigma < 0.0) {
    throw UsageError("densities and noise must be non-negative");
  }
  if (block_length < 1 || vigor_spread < 0.0 || vigor_spread >= 1.0) throw UsageError("invalid planting blocks");
  if (missing_tree_prob < 0.0 || missing_tree_prob >= 1.0) throw UsageError("missing_tree_prob must be in [0, 1)");
  if (gamma < 0 || !(r_th > 0.0)) throw UsageError("invalid loop parameters");
}

OrchardSpec OrchardSpec::summer_like() {
  OrchardSpec s;
  s.canopy_density = 20.0;
  s.canopy_scale = 1.0;
  return s;
}

OrchardSpec OrchardSpec::autumn_like() {
  OrchardSpec s;
  s.canopy_density = 10.0;
  s.canopy_scale = 0.8;
  return s;
}

OrchardSpec OrchardSpec::paper_scale() const {
  OrchardSpec s = *this;
  s.n_rows = 6;
  s.trees_per_row = 120;
  s.scan_step = 0.5;
  s.canopy_density *= 15.0;
  s.trunk_points *= 15.0;
  s.ground_points *= 15.0;
  s.points_per_scan = 60000;
  return s;
}

PathPlan parse_path_plan(const std::string& name) {
  if (name == "single_revisit" || name == "single") return PathPlan::single_revisit;
  if (name == "multi_revisit" || name == "multi") return PathPlan::multi_revisit;
  throw UsageError("unknown path plan '" + name + "'");
}

std::string to_string(PathPlan plan) {
  return plan == PathPlan::single_revisit ? "single_revisit" : "multi_revisit";
}

std::vector<int> corridor_passes(int n_rows, PathPlan plan) {
  std::vector<int> passes;
  for (int r = 0; r < n_rows; ++r) passes.push_back(r);
  if (plan == PathPlan::single_revisit) {
    // every other corridor is driven a second time
    for (int r = 0; r < n_rows; r += 2) passes.push_back(r);
  } else {
    // two more sweeps in the same order, so a corridor is never driven twice in a row
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int r = 0; r < n_rows; ++r) passes.push_back(r);
    }
  }
  return passes;
}

namespace {

std::vector<Tree> plant_orchard(const OrchardSpec& spec) {
  Rng rng(mix_seed(spec.seed, 0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> along(0.0, 0.15);
  std::normal_distribution<double> across(0.0, 0.08);
  std::vector<Tree> trees;
  for (int line = -spec.border_lines; line <= spec.n_rows + spec.border_lines; ++line) {
    double vigor = 1.0;
    for (int i = 0; i < spec.trees_per_row; ++i) {
      if (i % spec.block_length == 0) vigor = 1.0 + spec.vigor_spread * (2.0 * u(rng) - 1.0);
      // draw every attribute so the layout does not depend on which trees are missing
      const bool missing = u(rng) < spec.missing_tree_prob;
      Tree t;
      t.line = line;
      t.position = {i * spec.tree_spacing + along(rng), line * spec.row_spacing + across(rng)};
      t.trunk_height = (0.5 + 0.4 * u(rng)) * vigor;
      t.trunk_radius = (0.06 + 0.04 * u(rng)) * vigor;
      t.canopy_radius = (0.6 + 0.5 * u(rng)) * vigor * spec.canopy_scale;
      if (!missing) trees.push_back(t);
    }
  }
  return trees;
}

struct PathPose {
  Eigen::Vector2d position;
  double heading = 0.0;
  int pass = 0;
  int row = 0;
};

std::vector<PathPose> drive(const OrchardSpec& spec, PathPlan plan, std::vector<int>& pass_row) {
  Rng rng(mix_seed(spec.seed, 1));
  std::normal_distribution<double> lateral(0.0, spec.path_lateral_sigma);
  std::normal_distribution<double> yaw(0.0, spec.path_heading_sigma);
  const double x_begin = -1.0;
  const double x_end = (spec.trees_per_row - 1) * spec.tree_spacing + 1.0;
  const int steps = static_cast<int>(std::floor((x_end - x_begin) / spec.scan_step));

  pass_row = corridor_passes(spec.n_rows, plan);
  std::vector<PathPose> path;
  bool forward = true;
  for (std::size_t p = 0; p < pass_row.size(); ++p) {
    const int row = pass_row[p];
    const double y = (row + 0.5) * spec.row_spacing;
    for (int k = 0; k <= steps; ++k) {
      const double s = k * spec.scan_step;
      PathPose pose;
      pose.position = {forward ? x_begin + s : x_end - s, y + lateral(rng)};
      pose.heading = (forward ? 0.0 : std::numbers::pi) + yaw(rng);
      pose.pass = static_cast<int>(p);
      pose.row = row;
      path.push_back(pose);
    }
    forward = !forward;
  }
  return path;
}

double poisson_mean_visible(const OrchardSpec& spec) { return spec.trunk_points + spec.canopy_density; }

PointCloud scan_at(const OrchardSpec& spec, const std::vector<Tree>& trees, const PathPose& pose,
                   std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  std::vector<Eigen::Vector3d> pts;
  std::vector<double> inten;
  auto add = [&](const Eigen::Vector3d& p, double i) {
    pts.push_back(p);
    inten.push_back(std::clamp(i, 0.0, 1.0));
  };

  std::poisson_distribution<int> ground_count(spec.ground_points);
  const int ng = spec.ground_points > 0.0 ? ground_count(rng) : 0;
  for (int k = 0; k < ng; ++k) {
    const double r = spec.sensor_range * std::sqrt(u(rng));
    const double a = 2.0 * std::numbers::pi * u(rng);
    add({pose.position.x() + r * std::cos(a), pose.position.y() + r * std::sin(a), 0.0}, 0.1 + 0.1 * u(rng));
  }

  for (const Tree& t : trees) {
    if ((t.position - pose.position).norm() > spec.sensor_range) continue;
    std::poisson_distribution<int> trunk_count(std::max(spec.trunk_points, 1e-12));
    const int nt = spec.trunk_points > 0.0 ? trunk_count(rng) : 0;
    for (int k = 0; k < nt; ++k) {
      const double a = 2.0 * std::numbers::pi * u(rng);
      add({t.position.x() + t.trunk_radius * std::cos(a), t.position.y() + t.trunk_radius * std::sin(a),
           t.trunk_height * u(rng)},
          0.55 + 0.2 * u(rng));
    }
    std::poisson_distribution<int> canopy_count(std::max(spec.canopy_density, 1e-12));
    const int nc = spec.canopy_density > 0.0 ? canopy_count(rng) : 0;
    const double rv = 0.8 * t.canopy_radius;
    const Eigen::Vector3d centre(t.position.x(), t.position.y(), t.trunk_height + rv);
    for (int k = 0; k < nc; ++k) {
      // uniform in the ellipsoid volume
      const double cz = 2.0 * u(rng) - 1.0;
      const double a = 2.0 * std::numbers::pi * u(rng);
      const double sz = std::sqrt(1.0 - cz * cz);
      const double rr = std::cbrt(u(rng));
      add(centre + Eigen::Vector3d(t.canopy_radius * rr * sz * std::cos(a), t.canopy_radius * rr * sz * std::sin(a),
                                   rv * rr * cz),
          0.25 + 0.2 * u(rng));
    }
  }

  // world -> sensor frame
  const Eigen::Matrix3d r_ws = yaw_rotation(pose.heading);
  const Eigen::Vector3d origin(pose.position.x(), pose.position.y(), spec.sensor_height);
  PointCloud cloud;
  cloud.points.resize(3, static_cast<Index>(pts.size()));
  cloud.intensity.resize(static_cast<Index>(pts.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Eigen::Vector3d local = r_ws.transpose() * (pts[k] - origin);
    cloud.points.col(static_cast<Index>(k)) = local + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    cloud.intensity(static_cast<Index>(k)) = inten[k];
  }
  if (cloud.size() > spec.points_per_scan) cloud = random_downsample(cloud, spec.points_per_scan, mix_seed(seed, 7));
  return cloud;
}

}  // namespace

double expected_points(const OrchardSpec& spec, const std::vector<Tree>& trees, const Eigen::Vector2d& position) {
  double n = spec.ground_points;
  for (const Tree& t : trees) {
    if ((t.position - position).norm() <= spec.sensor_range) n += poisson_mean_visible(spec);
  }
  return n;
}

SyntheticSequence generate(const OrchardSpec& spec, PathPlan plan) {
  spec.validate();
  SyntheticSequence out;
  out.trees = plant_orchard(spec);
  for (const Tree& t : out.trees) out.landmarks.push_back(t.position);

  const std::vector<PathPose> path = drive(spec, plan, out.pass_row);
  const std::uint64_t scan_stream = mix_seed(spec.seed, plan == PathPlan::single_revisit ? 11 : 12);

  Sequence& seq = out.sequence;
  seq.entries.reserve(path.size());
  seq.scans.reserve(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    SequenceEntry e;
    e.index = static_cast<int>(k) + 1;
    e.pose = {path[k].position.x(), path[k].position.y(), 0.0};
    e.row_id = path[k].row;
    e.scan_path = scan_file_name(e.index);
    seq.entries.push_back(e);
    seq.headings.push_back(path[k].heading);
    seq.scans.push_back(scan_at(spec, out.trees, path[k], mix_seed(scan_stream, k)));
    out.pass_of.push_back(path[k].pass);
  }

  // Revisit log, kept per corridor while driving: every earlier scan on the
  // same corridor outside the last `gamma` frames and within r_th.
  std::map<int, std::vector<int>> seen_on_row;
  for (const SequenceEntry& e : seq.entries) {
    auto& seen = seen_on_row[e.row_id];
    for (int l : seen) {
      if (l >= e.index - spec.gamma) break;  // `seen` is in index order
      if ((seq.entries[static_cast<std::size_t>(l - 1)].pose - e.pose).norm() < spec.r_th) {
        out.revisit_log.emplace_back(e.index, l);
      }
    }
    seen.push_back(e.index);
  }
  return out;
}

std::vector<int> visible_trees(const SyntheticSequence& synth, const Eigen::Vector2d& position, double range) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < synth.trees.size(); ++i) {
    if ((synth.trees[i].position - position).norm() <= range) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

Descriptor oracle_descriptor(const SequenceEntry& entry, Index dim) {
  if (dim < 3) throw UsageError("oracle descriptor needs at least 3 dimensions");
  Descriptor d = Descriptor::Zero(dim);
  d.head<3>() = entry.pose;
  return d;
}

std::filesystem::path write_synthetic(const std::filesystem::path& dir, const SyntheticSequence& synth) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "scans", ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

  Manifest m;
  m.root = dir;
  m.headings = "headings.csv";
  m.landmarks = "landmarks.csv";
  m.revisits = "revisits.csv";
  const Sequence& seq = synth.sequence;
  write_poses_csv(dir / m.poses, seq.entries);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    write_scan_csv(dir / m.scans / scan_file_name(seq.entries[k].index), seq.scans[k]);
  }
  std::string headings = "index,heading\n";
  for (std::size_t k = 0; k < seq.headings.size(); ++k) {
    headings += std::to_string(k + 1) + ',' + csv::format_double(seq.headings[k]) + '\n';
  }
  csv::write_file(dir / m.headings, headings);
  write_landmarks_csv(dir / m.landmarks, synth.landmarks);
  std::string revisits = "anchor,positive\n";
  for (const auto& [a, p] : synth.revisit_log) revisits += std::to_string(a) + ',' + std::to_string(p) + '\n';
  csv::write_file(dir / m.revisits, revisits);
  const auto manifest_path = dir / "manifest.txt";
  write_manifest(manifest_path, m);
  return manifest_path;
}

std::vector<std::pair<int, int>> read_revisits_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != 2) throw DataError(path.string() + ": expected 'anchor,positive'");
    out.emplace_back(static_cast<int>(csv::parse_int(f[0], "anchor")),
                     static_cast<int>(csv::parse_int(f[1], "positive")));
  }
  return out;
}

}  // namespace orchnet
