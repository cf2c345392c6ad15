#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace acumen {

// Wrap to (-pi, pi]. Values already in range pass through untouched.
inline double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

// Planar pose plus finite-difference velocity, the 6-D state the dynamics
// models propagate.
struct StateEstimate {
  std::array<double, 3> pose{};  // x [m], y [m], psi [rad], psi in (-pi, pi]
  std::array<double, 3> vel{};   // xdot, ydot, psidot

  std::array<double, 6> flat() const {
    return {pose[0], pose[1], pose[2], vel[0], vel[1], vel[2]};
  }

  static StateEstimate from_flat(const std::array<double, 6>& v) {
    StateEstimate z;
    z.pose = {v[0], v[1], v[2]};
    z.vel = {v[3], v[4], v[5]};
    return z;
  }

  StateEstimate wrapped() const {
    StateEstimate z = *this;
    z.pose[2] = wrap_angle(z.pose[2]);
    return z;
  }
};

}  // namespace acumen
