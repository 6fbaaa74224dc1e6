#include "orchnet/cloud.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "orchnet/csv.hpp"

namespace orchnet {

PointCloud::PointCloud(Eigen::Matrix3Xd pts, Eigen::VectorXd inten)
    : points(std::move(pts)), intensity(std::move(inten)) {
  validate();
}

void PointCloud::validate() const {
  if (points.cols() != intensity.size()) {
    throw DataError("point cloud has " + std::to_string(points.cols()) + " points but " +
                    std::to_string(intensity.size()) + " intensities");
  }
  if (!points.allFinite()) throw DataError("point cloud contains non-finite coordinates");
}

namespace {

PointCloud gather(const PointCloud& cloud, const std::vector<Index>& idx) {
  PointCloud out;
  out.points.resize(3, static_cast<Index>(idx.size()));
  out.intensity.resize(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.points.col(static_cast<Index>(i)) = cloud.points.col(idx[i]);
    out.intensity(static_cast<Index>(i)) = cloud.intensity(idx[i]);
  }
  return out;
}

}  // namespace

PointCloud crop_xy(const PointCloud& cloud, double limit) {
  if (!(limit > 0.0)) throw UsageError("crop limit must be positive");
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) {
    if (std::abs(cloud.points(0, i)) <= limit && std::abs(cloud.points(1, i)) <= limit) {
      keep.push_back(i);
    }
  }
  return gather(cloud, keep);
}

PointCloud random_downsample(const PointCloud& cloud, Index n_target, std::uint64_t seed) {
  if (n_target < 1) throw UsageError("downsample target must be at least 1");
  const Index n = cloud.size();
  if (n == 0) throw DataError("cannot resample an empty point cloud");
  Rng rng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (n >= n_target) {
    // partial Fisher-Yates: the first n_target slots are a uniform draw without replacement
    for (Index i = 0; i < n_target; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(n_target));
  } else {
    std::uniform_int_distribution<Index> pick(0, n - 1);
    while (static_cast<Index>(idx.size()) < n_target) idx.push_back(pick(rng));
  }
  return gather(cloud, idx);
}

PointCloud rotate_yaw(const PointCloud& cloud, double angle) {
  PointCloud out = cloud;
  out.points = yaw_rotation(angle) * cloud.points;
  return out;
}

double draw_yaw(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // u in [0,1) maps onto (-pi, pi]
  return std::numbers::pi - 2.0 * std::numbers::pi * u(rng);
}

PointCloud random_yaw_augment(const PointCloud& cloud, std::uint64_t seed) {
  return rotate_yaw(cloud, draw_yaw(seed));
}

BevImage project_bev(const PointCloud& cloud, const BevConfig& config) {
  if (config.height < 1 || config.width < 1) throw UsageError("BEV grid must be at least 1x1");
  if (!(config.extent > 0.0)) throw UsageError("BEV extent must be positive");
  if (!(config.z_min < config.z_max)) throw UsageError("BEV z range must satisfy min < max");
  if (!(config.density_saturation > 0.0)) throw UsageError("BEV density saturation must be positive");

  const Index h = config.height;
  const Index w = config.width;
  BevImage bev;
  bev.extent = config.extent;
  bev.height_ch = Eigen::MatrixXd::Zero(h, w);
  bev.density_ch = Eigen::MatrixXd::Zero(h, w);
  bev.intensity_ch = Eigen::MatrixXd::Zero(h, w);

  Eigen::MatrixXd max_z = Eigen::MatrixXd::Constant(h, w, -std::numeric_limits<double>::infinity());
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(h, w);
  Eigen::MatrixXd inten_sum = Eigen::MatrixXd::Zero(h, w);

  const double span = 2.0 * config.extent;
  for (Index i = 0; i < cloud.size(); ++i) {
    const double x = cloud.points(0, i);
    const double y = cloud.points(1, i);
    const double z = cloud.points(2, i);
    if (std::abs(x) > config.extent || std::abs(y) > config.extent) continue;
    if (z < config.z_min || z > config.z_max) continue;
    const Index r = std::min<Index>(h - 1, static_cast<Index>((x + config.extent) / span * static_cast<double>(h)));
    const Index c = std::min<Index>(w - 1, static_cast<Index>((y + config.extent) / span * static_cast<double>(w)));
    max_z(r, c) = std::max(max_z(r, c), z);
    count(r, c) += 1.0;
    inten_sum(r, c) += cloud.intensity(i);
  }

  const double z_span = config.z_max - config.z_min;
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h; ++r) {
      const double n = count(r, c);
      if (n == 0.0) continue;
      bev.height_ch(r, c) = std::clamp((max_z(r, c) - config.z_min) / z_span, 0.0, 1.0);
      bev.density_ch(r, c) = std::min(n, config.density_saturation) / config.density_saturation;
      bev.intensity_ch(r, c) = std::clamp(inten_sum(r, c) / n, 0.0, 1.0);
    }
  }
  return bev;
}

PointCloud read_scan_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  std::vector<std::array<double, 4>> rows;
  rows.reserve(lines.size());
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = csv::split(lines[ln]);
    if (fields.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(ln + 1) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    std::array<double, 4> row{};
    for (std::size_t f = 0; f < 4; ++f) row[f] = csv::parse_double(fields[f], "scan value");
    rows.push_back(row);
  }
  PointCloud cloud;
  cloud.points.resize(3, static_cast<Index>(rows.size()));
  cloud.intensity.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto col = static_cast<Index>(i);
    cloud.points.col(col) << rows[i][0], rows[i][1], rows[i][2];
    cloud.intensity(col) = rows[i][3];
  }
  cloud.validate();
  return cloud;
}

void write_scan_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  std::string out;
  out.reserve(static_cast<std::size_t>(cloud.size()) * 48);
  for (Index i = 0; i < cloud.size(); ++i) {
    out += csv::format_double(cloud.points(0, i));
    out += ',';
    out += csv::format_double(cloud.points(1, i));
    out += ',';
    out += csv::format_double(cloud.points(2, i));
    out += ',';
    out += csv::format_double(cloud.intensity(i));
    out += '\n';
  }
  csv::write_file(path, out);
}

}  // namespace orchnet
