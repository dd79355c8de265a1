#pragma once

#include <stdexcept>
#include <string>

namespace sbvm {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside the domain of a function (natural parameter, observation
// space, support indices, block lengths).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Support enumeration would exceed the configured cap.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// A matrix that must be positive definite is not.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbvm
