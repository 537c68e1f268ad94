#pragma once

// Ray-fraction visibility model: N rays from the robot's sensor point to N
// evenly spaced samples on a disc around the worker; confidence is the share
// of rays that no occluder blocks.

#include "safex/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace safex {

inline constexpr int kVisibilityRays = 25;
inline constexpr double kWorkerSampleRadius = 0.3;  // meters

/// Sunflower (Vogel) layout: sample i sits at radius r*sqrt((i+0.5)/N) and
/// angle i*golden_angle, which spreads N points evenly over the disc.
inline std::array<Vec2, kVisibilityRays> worker_samples(Vec2 center) {
  static const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::array<Vec2, kVisibilityRays> pts{};
  for (int i = 0; i < kVisibilityRays; ++i) {
    const double r = kWorkerSampleRadius * std::sqrt((i + 0.5) / kVisibilityRays);
    const double a = i * golden;
    pts[i] = center + Vec2{r * std::cos(a), r * std::sin(a)};
  }
  return pts;
}

/// Per-ray blocking mask for one occluder.
inline std::array<bool, kVisibilityRays> blocked_rays(Vec2 sensor, Vec2 worker, const Occluder& o) {
  std::array<bool, kVisibilityRays> mask{};
  const auto pts = worker_samples(worker);
  for (int i = 0; i < kVisibilityRays; ++i) mask[i] = segment_hits(sensor, pts[i], o.shape, o.position);
  return mask;
}

inline double compute_visibility(const RobotState& robot, const HumanState& human,
                                 const std::vector<Occluder>& occluders) {
  std::array<bool, kVisibilityRays> any{};
  for (const auto& o : occluders) {
    const auto m = blocked_rays(robot.position, human.position, o);
    for (int i = 0; i < kVisibilityRays; ++i) any[i] = any[i] || m[i];
  }
  const auto blocked = std::count(any.begin(), any.end(), true);
  return static_cast<double>(kVisibilityRays - blocked) / kVisibilityRays;
}

/// Ids of occluders blocking at least one ray, by blocked-ray count descending,
/// ties by id.
inline std::vector<std::string> attribute_occlusion(const RobotState& robot, const HumanState& human,
                                                    const std::vector<Occluder>& occluders) {
  std::vector<std::pair<int, std::string>> counts;
  for (const auto& o : occluders) {
    const auto m = blocked_rays(robot.position, human.position, o);
    const int n = static_cast<int>(std::count(m.begin(), m.end(), true));
    if (n > 0) counts.emplace_back(n, o.occluder_id);
  }
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  ids.reserve(counts.size());
  for (auto& [n, id] : counts) ids.push_back(std::move(id));
  return ids;
}

}  // namespace safex
