#include "orchnet/loopmcl.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "orchnet/csv.hpp"

namespace orchnet {

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a <= 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

OdomDelta relative_motion(const Pose2& from, const Pose2& to) {
  const double c = std::cos(from.heading);
  const double s = std::sin(from.heading);
  const double wx = to.x - from.x;
  const double wy = to.y - from.y;
  return {c * wx + s * wy, -s * wx + c * wy, wrap_angle(to.heading - from.heading)};
}

Pose2 compose(const Pose2& pose, const OdomDelta& d) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  return {pose.x + c * d.dx - s * d.dy, pose.y + s * d.dx + c * d.dy, wrap_angle(pose.heading + d.dtheta)};
}

void predict(ParticleSet& particles, const OdomDelta& delta, const MotionNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Particle& p : particles) {
    OdomDelta d = delta;
    // always draw, so the stream does not depend on which sigmas are zero
    d.dx += noise.x * n01(rng);
    d.dy += noise.y * n01(rng);
    d.dtheta += noise.heading * n01(rng);
    const Pose2 moved = compose({p.x, p.y, p.heading}, d);
    p.x = moved.x;
    p.y = moved.y;
    p.heading = moved.heading;
  }
}

double point_likelihood(double distance, const LikelihoodConfig& config) {
  const double d = std::min(distance, config.max_distance);
  return std::exp(-d * d / (2.0 * config.sigma * config.sigma));
}

double nearest_landmark_distance(const std::vector<Eigen::Vector2d>& landmarks, const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : landmarks) best = std::min(best, (l - p).squaredNorm());
  return std::sqrt(best);
}

void normalize_weights(ParticleSet& particles) {
  if (particles.empty()) return;
  double total = 0.0;
  for (const Particle& p : particles) total += p.weight;
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::cerr << "warning: particle weights degenerate, resetting to uniform\n";
    for (Particle& p : particles) p.weight = 1.0 / static_cast<double>(particles.size());
    return;
  }
  for (Particle& p : particles) p.weight /= total;
}

void update_weights(ParticleSet& particles, const PointCloud& scan, const std::vector<Eigen::Vector2d>& landmarks,
                    const LikelihoodConfig& config) {
  if (landmarks.empty()) throw UsageError("likelihood update needs at least one landmark");
  if (config.subsample < 1 || !(config.sigma > 0.0)) throw UsageError("invalid likelihood configuration");

  std::vector<Eigen::Vector2d> pts;
  for (Index i = 0; i < scan.size(); i += config.subsample) {
    const double z = scan.points(2, i);
    if (z < config.z_min || z > config.z_max) continue;
    pts.emplace_back(scan.points(0, i), scan.points(1, i));
  }
  if (pts.empty() || particles.empty()) {
    normalize_weights(particles);
    return;
  }

  // accumulate in log space, then shift by the maximum before exponentiating
  const double inv_two_var = 1.0 / (2.0 * config.sigma * config.sigma);
  std::vector<double> log_w(particles.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < particles.size(); ++k) {
    const Particle& p = particles[k];
    const double c = std::cos(p.heading);
    const double s = std::sin(p.heading);
    double lw = p.weight > 0.0 ? std::log(p.weight) : -std::numeric_limits<double>::infinity();
    for (const auto& q : pts) {
      const Eigen::Vector2d world(p.x + c * q.x() - s * q.y(), p.y + s * q.x() + c * q.y());
      const double d = std::min(nearest_landmark_distance(landmarks, world), config.max_distance);
      lw -= d * d * inv_two_var;
    }
    log_w[k] = lw;
    best = std::max(best, lw);
  }
  if (!std::isfinite(best)) {
    for (Particle& p : particles) p.weight = 0.0;
  } else {
    for (std::size_t k = 0; k < particles.size(); ++k) particles[k].weight = std::exp(log_w[k] - best);
  }
  normalize_weights(particles);
}

ParticleSet resample_with_loops(const ParticleSet& particles, const std::vector<LoopProposal>& proposals,
                                double p_inject, std::uint64_t seed, const ResampleConfig& config) {
  if (particles.empty()) return {};
  if (p_inject < 0.0 || p_inject > 1.0) throw UsageError("p_inject must lie in [0, 1]");
  const std::size_t n = particles.size();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  // stratified choice per slot: slot i is injected when (i + u) / n < p_inject
  std::size_t n_inject = 0;
  if (!proposals.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if ((static_cast<double>(i) + u01(rng)) / static_cast<double>(n) < p_inject) ++n_inject;
    }
  }

  ParticleSet out;
  out.reserve(n);
  if (n_inject > 0) {
    std::vector<double> sim;
    for (const LoopProposal& lp : proposals) {
      if (!(lp.similarity > 0.0) || !std::isfinite(lp.similarity)) throw UsageError("loop proposal similarity must be finite and positive");
      sim.push_back(lp.similarity);
    }
    std::discrete_distribution<std::size_t> pick(sim.begin(), sim.end());
    for (std::size_t i = 0; i < n_inject; ++i) {
      const LoopProposal& lp = proposals[pick(rng)];
      Particle p;
      p.x = lp.pose.x + config.jitter_xy * n01(rng);
      p.y = lp.pose.y + config.jitter_xy * n01(rng);
      const double h = std::isnan(lp.pose.heading) ? std::numbers::pi - 2.0 * std::numbers::pi * u01(rng)
                                                    : lp.pose.heading + config.jitter_heading * n01(rng);
      p.heading = wrap_angle(h);
      out.push_back(p);
    }
  }

  const std::size_t n_keep = n - n_inject;
  if (n_keep > 0) {
    double total = 0.0;
    for (const Particle& p : particles) total += p.weight;
    if (!(total > 0.0)) throw UsageError("resampling needs normalized particle weights");
    const double step = total / static_cast<double>(n_keep);
    double target = u01(rng) * step;
    double cumulative = particles[0].weight;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n_keep; ++i) {
      while (target > cumulative && j + 1 < n) cumulative += particles[++j].weight;
      out.push_back(particles[j]);
      target += step;
    }
  }
  for (Particle& p : out) p.weight = 1.0 / static_cast<double>(n);
  return out;
}

Pose2 estimate_pose(const ParticleSet& particles) {
  Pose2 e;
  double total = 0.0;
  double sc = 0.0;
  double ss = 0.0;
  for (const Particle& p : particles) {
    e.x += p.weight * p.x;
    e.y += p.weight * p.y;
    sc += p.weight * std::cos(p.heading);
    ss += p.weight * std::sin(p.heading);
    total += p.weight;
  }
  if (total > 0.0) {
    e.x /= total;
    e.y /= total;
  }
  e.heading = std::atan2(ss, sc);
  return e;
}

LocalizationConfig LocalizationConfig::drift_preset() {
  LocalizationConfig c;
  c.odometry.scale_bias = -0.2;
  c.odometry.heading_bias = 0.01;
  c.odometry.trans_noise = 0.02;
  c.odometry.rot_noise = 0.02;
  // trunk band: 0.2 m to 0.8 m above ground for a sensor mounted at 0.8 m
  c.likelihood.z_min = -0.6;
  c.likelihood.z_max = 0.0;
  c.likelihood.subsample = 200;
  // proposals come from other passes, not from the scans just driven
  c.exclude_window = 25;
  return c;
}

double rmse(const std::vector<Pose2>& a, const std::vector<Pose2>& b, std::size_t begin, std::size_t end) {
  end = std::min({end, a.size(), b.size()});
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dx = a[i].x - b[i].x;
    const double dy = a[i].y - b[i].y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(end - begin));
}

LocalizationResult run_localization(const LocalizationInput& input, const LocalizationConfig& config) {
  if (input.sequence == nullptr || input.landmarks == nullptr) throw UsageError("localization needs a sequence and landmarks");
  const Sequence& seq = *input.sequence;
  if (input.landmarks->empty()) throw DataError("localization needs a non-empty landmark map");
  if (seq.headings.size() != seq.size() || seq.scans.size() != seq.size()) {
    throw DataError("localization needs scans and headings for every entry");
  }
  if (config.particles < 1) throw UsageError("at least one particle is required");
  const bool use_proposals = input.descriptors != nullptr && !input.descriptors->empty() && config.p_inject > 0.0;
  if (use_proposals && input.descriptors->size() != seq.size()) throw UsageError("one descriptor per entry is required");

  LocalizationResult result;
  const std::size_t n = seq.size();
  for (std::size_t t = 0; t < n; ++t) {
    result.truth.push_back({seq.entries[t].pose.x(), seq.entries[t].pose.y(), seq.headings[t]});
  }
  if (n == 0) return result;

  // synthetic odometry with bias and noise
  std::vector<OdomDelta> odom(n);
  {
    Rng rng(mix_seed(config.seed, 100));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t t = 1; t < n; ++t) {
      const OdomDelta truth = relative_motion(result.truth[t - 1], result.truth[t]);
      const double dist = std::hypot(truth.dx, truth.dy);
      OdomDelta m;
      m.dx = truth.dx * (1.0 + config.odometry.scale_bias) + config.odometry.trans_noise * dist * n01(rng);
      m.dy = truth.dy * (1.0 + config.odometry.scale_bias) + config.odometry.trans_noise * dist * n01(rng);
      m.dtheta = truth.dtheta + config.odometry.heading_bias * dist +
                 config.odometry.rot_noise * std::abs(truth.dtheta) * n01(rng);
      odom[t] = m;
    }
  }
  result.dead_reckoning.push_back(result.truth[0]);
  for (std::size_t t = 1; t < n; ++t) result.dead_reckoning.push_back(compose(result.dead_reckoning.back(), odom[t]));

  ParticleSet particles(static_cast<std::size_t>(config.particles));
  {
    Rng rng(mix_seed(config.seed, 200));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Particle& p : particles) {
      p.x = result.truth[0].x + config.init_spread.x * n01(rng);
      p.y = result.truth[0].y + config.init_spread.y * n01(rng);
      p.heading = wrap_angle(result.truth[0].heading + config.init_spread.heading * n01(rng));
      p.weight = 1.0 / static_cast<double>(particles.size());
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      const double dist = std::hypot(odom[t].dx, odom[t].dy);
      const MotionNoise noise{config.motion_noise_xy + config.motion_noise_xy_per_m * dist,
                              config.motion_noise_xy + config.motion_noise_xy_per_m * dist,
                              config.motion_noise_heading + config.motion_noise_heading_per_rad * std::abs(odom[t].dtheta)};
      predict(particles, odom[t], noise, mix_seed(config.seed, 1000 + t));
    }
    update_weights(particles, seq.scans[t], *input.landmarks, config.likelihood);
    result.estimate.push_back(estimate_pose(particles));

    std::vector<LoopProposal> proposals;
    if (use_proposals) {
      const auto& desc = *input.descriptors;
      std::vector<std::pair<double, std::size_t>> ranked;
      for (std::size_t i = 0; i < n; ++i) {
        const auto gap = static_cast<long long>(i) - static_cast<long long>(t);
        if (std::llabs(gap) <= config.exclude_window) continue;
        ranked.emplace_back((desc[i] - desc[t]).norm(), i);
      }
      const std::size_t k = std::min(ranked.size(), static_cast<std::size_t>(std::max(0, config.proposals_per_query)));
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
      for (std::size_t r = 0; r < k; ++r) {
        const SequenceEntry& e = seq.entries[ranked[r].second];
        proposals.push_back({{e.pose.x(), e.pose.y(), std::numeric_limits<double>::quiet_NaN()},
                             1.0 / (config.similarity_eps + ranked[r].first)});
      }
    }
    particles = resample_with_loops(particles, proposals, use_proposals ? config.p_inject : 0.0,
                                    mix_seed(config.seed, 5000 + t), config.resample);
  }

  result.rmse = rmse(result.estimate, result.truth, 0, n);
  result.rmse_first_third = rmse(result.estimate, result.truth, 0, n / 3);
  result.rmse_final_third = rmse(result.estimate, result.truth, (2 * n) / 3, n);
  return result;
}

std::string trajectory_csv(const LocalizationResult& result) {
  std::string out = "t,x_est,y_est,heading_est,x_gt,y_gt\n";
  for (std::size_t t = 0; t < result.estimate.size(); ++t) {
    const Pose2& e = result.estimate[t];
    const Pose2& g = result.truth[t];
    out += std::to_string(t) + ',' + csv::format_double(e.x) + ',' + csv::format_double(e.y) + ',' +
           csv::format_double(e.heading) + ',' + csv::format_double(g.x) + ',' + csv::format_double(g.y) + '\n';
  }
  return out;
}

std::string trajectory_svg(const LocalizationResult& result, const std::vector<Eigen::Vector2d>& landmarks) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  auto extend = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& p : result.truth) extend(p.x, p.y);
  for (const auto& p : result.estimate) extend(p.x, p.y);
  for (const auto& l : landmarks) extend(l.x(), l.y());
  if (!std::isfinite(min_x)) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";

  const double scale = 20.0;
  const double pad = 1.0;
  const double width = (max_x - min_x + 2 * pad) * scale;
  const double height = (max_y - min_y + 2 * pad) * scale;
  auto sx = [&](double x) { return csv::format_double(std::round((x - min_x + pad) * scale * 100.0) / 100.0); };
  auto sy = [&](double y) { return csv::format_double(std::round((max_y - y + pad) * scale * 100.0) / 100.0); };
  auto polyline = [&](const std::vector<Pose2>& path, const char* colour) {
    std::string s = "<polyline fill=\"none\" stroke=\"";
    s += colour;
    s += "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : path) s += sx(p.x) + ',' + sy(p.y) + ' ';
    s += "\"/>\n";
    return s;
  };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + csv::format_double(std::round(width)) +
                    "\" height=\"" + csv::format_double(std::round(height)) + "\">\n";
  for (const auto& l : landmarks) {
    out += "<circle cx=\"" + sx(l.x()) + "\" cy=\"" + sy(l.y()) + "\" r=\"2\" fill=\"#2e7d32\"/>\n";
  }
  out += polyline(result.truth, "#000000");
  out += polyline(result.estimate, "#d32f2f");
  out += "</svg>\n";
  return out;
}

}  // namespace orchnet
