#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace beamlab {

// Configuration problems map to exit code 2, numerical failures to 3.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    ConfigError(const std::string& head, std::vector<std::string> items)
        : std::runtime_error(join(head, items)), items_(std::move(items)) {}
    const std::vector<std::string>& items() const { return items_; }

  private:
    static std::string join(const std::string& head, const std::vector<std::string>& items) {
        std::string s = head;
        for (const auto& it : items) s += "\n  - " + it;
        return s;
    }
    std::vector<std::string> items_;
};

class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Expression parse failures and evaluation domain errors (division by zero, log of non-positive).
class ParseError : public ConfigError {
  public:
    ParseError(const std::string& msg, std::size_t pos)
        : ConfigError(msg + " at position " + std::to_string(pos)), pos_(pos) {}
    std::size_t position() const { return pos_; }

  private:
    std::size_t pos_;
};

class DomainError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class TrappedGeodesicError : public NumericalError {
  public:
    explicit TrappedGeodesicError(double t_max)
        : NumericalError("geodesic did not exit before t_max = " + std::to_string(t_max)), t_max_(t_max) {}
    double t_max() const { return t_max_; }

  private:
    double t_max_;
};

class TubeRadiusError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class IntegrationError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class CoverageError : public NumericalError {
  public:
    CoverageError(double a, double b)
        : NumericalError("tube segments leave [" + std::to_string(a) + ", " + std::to_string(b) + "] uncovered"),
          a_(a), b_(b) {}
    double gap_begin() const { return a_; }
    double gap_end() const { return b_; }

  private:
    double a_, b_;
};

class RegularizationError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class PoleError : public NumericalError {
  public:
    PoleError(const std::string& msg, double nearest) : NumericalError(msg), nearest_(nearest) {}
    double nearest_eigenvalue() const { return nearest_; }

  private:
    double nearest_;
};

class PreconditionError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

}  // namespace beamlab
