#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linflow {

// Base of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that violate an operation's precondition (shape, range, symmetry).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An iterative kernel hit its iteration cap.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, std::size_t iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

// Training aborted by the loss blow-up guard.
class Diverged : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace linflow
