#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace acumen {

// Timestamped command knots with piecewise-linear interpolation in between
// and constant hold outside the knot range. Timestamps are strictly
// increasing; all actions share one dimension.
class ActionSchedule {
 public:
  ActionSchedule() = default;
  ActionSchedule(std::vector<double> times, std::vector<std::vector<double>> actions);

  static ActionSchedule single(double t, std::vector<double> action);

  void append(double t, std::vector<double> action);

  bool empty() const { return times_.empty(); }
  std::size_t size() const { return times_.size(); }
  std::size_t action_dim() const { return dim_; }
  double first_time() const { return times_.front(); }
  double last_time() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& action_at(std::size_t k) const { return actions_[k]; }

  // Linear interpolation; nearest endpoint outside [first, last].
  // Throws EmptyScheduleError on an empty schedule.
  std::vector<double> value(double t) const;
  void value_into(double t, std::span<double> out) const;

  // Knots within [t0, t1] plus one boundary knot on each side when present,
  // so the slice reproduces the full schedule on the interval.
  ActionSchedule slice(double t0, double t1) const;

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> actions_;
  std::size_t dim_ = 0;
};

inline std::vector<double> interp_at(const ActionSchedule& s, double t) { return s.value(t); }

}  // namespace acumen
