#pragma once

#include <array>
#include <span>

#include "acumen/env.hpp"

namespace acumen {

struct TrajectoryMetrics {
  double length = 0.0;        // polyline arc length [m]
  double irregularity = 0.0;  // discrete total curvature: sum of |turning angles| [rad]
  int applied_actions = 0;
  EpisodeStatus outcome = EpisodeStatus::kTimeout;
};

// Length and total curvature of a planar path; segments shorter than 1e-6 m
// are skipped. Throws InsufficientDataError below 2 points.
TrajectoryMetrics traj_metrics(std::span<const std::array<double, 2>> positions);

}  // namespace acumen
