#pragma once

#include <stdexcept>
#include <sstream>
#include <string>

namespace ltcredit {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical routine (quadrature, root finder, rejection loop) failed to
/// reach its target accuracy. Carries the accuracy that was achieved.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved)
      : std::runtime_error(format(what, achieved)), achieved_(achieved) {}

  double achieved() const noexcept { return achieved_; }

 private:
  static std::string format(const std::string& what, double achieved) {
    std::ostringstream os;
    os << what << " (achieved tolerance " << achieved << ")";
    return os.str();
  }

  double achieved_;
};

/// A Monte Carlo run produced no usable information (e.g. zero exceedances).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ltcredit
