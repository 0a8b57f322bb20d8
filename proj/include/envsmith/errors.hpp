#pragma once

#include <stdexcept>
#include <string>

namespace envsmith {

/// Base class for all library failures. Tool-call failures are not
/// exceptions; they travel as data inside ToolCallResult.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaViolation : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class ArgKindMismatch : public Error {
 public:
  using Error::Error;
};

/// The configured generator backend cannot serve a request (network down,
/// cassette miss, no backend configured).
class ClientUnavailable : public Error {
 public:
  using Error::Error;
};

class EmptyGraph : public Error {
 public:
  using Error::Error;
};

class BindingUnresolved : public Error {
 public:
  using Error::Error;
};

class RefinementRejected : public Error {
 public:
  using Error::Error;
};

class DegenerateGroup : public Error {
 public:
  using Error::Error;
};

class DegenerateEnvironment : public Error {
 public:
  using Error::Error;
};

class AllMasked : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class MissingInput : public Error {
 public:
  using Error::Error;
};

/// Raised inside effect execution and converted to a ToolCallResult error
/// code at the execute_tool boundary. `code` is the machine-readable part.
class EffectRuntimeError : public Error {
 public:
  EffectRuntimeError(std::string code, const std::string& detail)
      : Error(code + ": " + detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace envsmith
