#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace impact_qlbs {

/// Invalid user-supplied configuration; the CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Runtime failure of the model itself; the CLI maps this to exit code 2.
class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A quoted or implied rate fell to zero or below during impact propagation.
class NonPositiveRate : public ModelError {
public:
  NonPositiveRate(std::size_t path, std::size_t time, double value)
      : ModelError("non-positive rate at path " + std::to_string(path) + ", t=" +
                   std::to_string(time) + ": " + std::to_string(value)),
        path_(path),
        time_(time),
        value_(value) {}

  std::size_t path() const noexcept { return path_; }
  std::size_t time() const noexcept { return time_; }
  double value() const noexcept { return value_; }

private:
  std::size_t path_;
  std::size_t time_;
  double value_;
};

/// The regularized normal equations could not be solved at one time step.
class SingularSystem : public ModelError {
public:
  explicit SingularSystem(int time_step)
      : ModelError("singular regression system at t=" + std::to_string(time_step)),
        time_step_(time_step) {}

  int time_step() const noexcept { return time_step_; }

private:
  int time_step_;
};

}  // namespace impact_qlbs
