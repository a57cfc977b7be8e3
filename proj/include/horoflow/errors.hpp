#pragma once

#include <stdexcept>
#include <string>

namespace horoflow {

/// Input outside the mathematical domain of an operation (Im z <= 0, zero covector, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid or unsupported configuration. `field` carries the config path when known.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Broken internal invariant (non-terminating reduction, singular Moebius denominator).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Quadrature error estimate above the requested tolerance.
class PrecisionError : public std::runtime_error {
 public:
  PrecisionError(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

/// Energy drift of the splitting integrator beyond the configured bound.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time, double drift)
      : std::runtime_error(what), time_(time), drift_(drift) {}
  double time() const noexcept { return time_; }
  double drift() const noexcept { return drift_; }

 private:
  double time_;
  double drift_;
};

class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two independent estimates of the same quantity disagree beyond their error bars.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace horoflow
