#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace linproj {

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// non-finite input, invalid parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by canonicalization when an inequality row can never hold under
/// the variable box (negative slack capacity).
class CertifiedInfeasible : public std::runtime_error {
 public:
  CertifiedInfeasible(const std::string& what, std::size_t row, double capacity)
      : std::runtime_error(what), row_(row), capacity_(capacity) {}

  std::size_t row() const noexcept { return row_; }
  double capacity() const noexcept { return capacity_; }

 private:
  std::size_t row_;
  double capacity_;
};

/// Conjugate gradients failed on the KKT system even after the Tikhonov retry.
class SingularKkt : public std::runtime_error {
 public:
  SingularKkt(const std::string& what, std::vector<double> best_iterate, double residual)
      : std::runtime_error(what), best_(std::move(best_iterate)), residual_(residual) {}

  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_;
  double residual_;
};

namespace detail {

inline void require(bool ok, const char* message) {
  if (!ok) throw ContractViolation(message);
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace linproj
