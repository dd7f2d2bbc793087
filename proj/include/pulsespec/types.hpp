// Common scalar/matrix typedefs and the error taxonomy shared by all modules.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace pspec {

using Cplx = std::complex<double>;
using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

constexpr double pi = 3.14159265358979323846;

// Error kinds map onto the CLI exit codes: config -> 2, missing input -> 3,
// solver/domain/precondition failures -> 4, accuracy failures -> 5.
enum class ErrorKind { config, missing_input, solver, accuracy, domain, precondition };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::config:        return 2;
      case ErrorKind::missing_input: return 3;
      case ErrorKind::accuracy:      return 5;
      default:                       return 4;
    }
  }
private:
  ErrorKind kind_;
};

}  // namespace pspec
