#include "acumen/schedule.hpp"

#include <algorithm>
#include <cassert>

#include "acumen/errors.hpp"

namespace acumen {

ActionSchedule::ActionSchedule(std::vector<double> times,
                               std::vector<std::vector<double>> actions)
    : times_(std::move(times)), actions_(std::move(actions)) {
  if (times_.size() != actions_.size())
    throw ShapeError("schedule times/actions length mismatch");
  if (!actions_.empty()) dim_ = actions_.front().size();
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (k > 0 && !(times_[k] > times_[k - 1]))
      throw OrderingError("schedule timestamps must be strictly increasing");
    if (actions_[k].size() != dim_)
      throw ShapeError("schedule action dimension mismatch");
  }
}

ActionSchedule ActionSchedule::single(double t, std::vector<double> action) {
  ActionSchedule s;
  s.append(t, std::move(action));
  return s;
}

void ActionSchedule::append(double t, std::vector<double> action) {
  if (!times_.empty() && !(t > times_.back()))
    throw OrderingError("appended knot must be later than the last one");
  if (times_.empty())
    dim_ = action.size();
  else if (action.size() != dim_)
    throw ShapeError("appended action dimension mismatch");
  times_.push_back(t);
  actions_.push_back(std::move(action));
}

std::vector<double> ActionSchedule::value(double t) const {
  std::vector<double> out(dim_);
  value_into(t, out);
  return out;
}

void ActionSchedule::value_into(double t, std::span<double> out) const {
  if (times_.empty()) throw EmptyScheduleError();
  assert(out.size() == dim_);
  if (t <= times_.front()) {
    std::copy(actions_.front().begin(), actions_.front().end(), out.begin());
    return;
  }
  if (t >= times_.back()) {
    std::copy(actions_.back().begin(), actions_.back().end(), out.begin());
    return;
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  for (std::size_t d = 0; d < dim_; ++d)
    out[d] = actions_[lo][d] + w * (actions_[hi][d] - actions_[lo][d]);
}

ActionSchedule ActionSchedule::slice(double t0, double t1) const {
  ActionSchedule out;
  if (times_.empty()) return out;
  std::size_t lo = 0;
  while (lo + 1 < times_.size() && times_[lo + 1] <= t0) ++lo;
  std::size_t hi = times_.size() - 1;
  while (hi > 0 && times_[hi - 1] >= t1) --hi;
  for (std::size_t k = lo; k <= hi; ++k) out.append(times_[k], actions_[k]);
  return out;
}

}  // namespace acumen
