#pragma once

#include <stdexcept>
#include <string>

namespace acumen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyScheduleError : public Error {
 public:
  EmptyScheduleError() : Error("action schedule is empty") {}
};

class IntegrationDivergedError : public Error {
 public:
  explicit IntegrationDivergedError(double t_fail)
      : Error("integration diverged at t=" + std::to_string(t_fail)), t_fail(t_fail) {}
  double t_fail;
};

class StepUnderflowError : public Error {
 public:
  explicit StepUnderflowError(double h)
      : Error("adaptive step underflow, h=" + std::to_string(h)), h(h) {}
  double h;
};

class GradientOverflowError : public Error {
 public:
  explicit GradientOverflowError(std::size_t param_index)
      : Error("non-finite gradient at parameter " + std::to_string(param_index)),
        param_index(param_index) {}
  std::size_t param_index;
};

class EmptyDatasetError : public Error {
 public:
  EmptyDatasetError() : Error("training dataset is empty") {}
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class DegenerateIntervalError : public Error {
 public:
  using Error::Error;
};

class PlannerDegenerateError : public Error {
 public:
  PlannerDegenerateError() : Error("all candidate sequences scored -inf") {}
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& key_path, const std::string& what)
      : Error("config error at '" + key_path + "': " + what), key_path(key_path) {}
  std::string key_path;
};

}  // namespace acumen
