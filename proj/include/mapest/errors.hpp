#pragma once

#include <stdexcept>
#include <string>

namespace mapest {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// coordinates outside the chart domain, bad descriptor parameters
class DomainError : public Error {
 public:
  using Error::Error;
};

class CutLocusError : public Error {
 public:
  using Error::Error;
};

class ShootingError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class OutsideTubeError : public Error {
 public:
  OutsideTubeError(double distance, double radius)
      : Error("point outside tube: distance " + std::to_string(distance) + " >= tube radius " +
              std::to_string(radius)),
        distance_(distance),
        radius_(radius) {}
  double distance() const { return distance_; }
  double tube_radius() const { return radius_; }

 private:
  double distance_;
  double radius_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class MapKindError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class PriorError : public Error {
 public:
  using Error::Error;
};

class UnderflowError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mapest
