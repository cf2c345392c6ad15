#include "acumen/metrics.hpp"

#include <cmath>

#include "acumen/errors.hpp"

namespace acumen {

TrajectoryMetrics traj_metrics(std::span<const std::array<double, 2>> positions) {
  if (positions.size() < 2)
    throw InsufficientDataError("trajectory metrics need at least 2 points");
  constexpr double kMinSegment = 1e-6;

  TrajectoryMetrics m;
  bool have_dir = false;
  std::array<double, 2> dir{};
  for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
    const double dx = positions[k + 1][0] - positions[k][0];
    const double dy = positions[k + 1][1] - positions[k][1];
    const double len = std::hypot(dx, dy);
    if (len < kMinSegment) continue;
    m.length += len;
    if (have_dir) {
      const double cross = dir[0] * dy - dir[1] * dx;
      const double dot = dir[0] * dx + dir[1] * dy;
      m.irregularity += std::abs(std::atan2(cross, dot));
    }
    dir = {dx, dy};
    have_dir = true;
  }
  return m;
}

}  // namespace acumen
