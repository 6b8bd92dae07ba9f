#pragma once

#include <stdexcept>
#include <string>

namespace ktraffic {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// A density or other argument lies outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a positivity violation beyond tolerance during time stepping.
class IntegrationDiverged : public Error {
 public:
  using Error::Error;
};

/// An invariant the closed-form construction guarantees has been violated.
class InternalConsistency : public Error {
 public:
  using Error::Error;
};

class MalformedDiagram : public Error {
 public:
  using Error::Error;
};

/// Requested operation exceeds a documented capability limit.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ktraffic
