#pragma once

#include <stdexcept>
#include <string>

namespace demi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class MeshTooCoarse : public Error {
 public:
  using Error::Error;
};

class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

class DegenerateStep : public Error {
 public:
  using Error::Error;
};

class NotConverged : public Error {
 public:
  using Error::Error;
};

class BlowUp : public Error {
 public:
  using Error::Error;
};

class BracketInvalid : public Error {
 public:
  using Error::Error;
};

class NonpositiveWitness : public Error {
 public:
  using Error::Error;
};

class ExponentUnresolved : public Error {
 public:
  using Error::Error;
};

class ParameterTooSmall : public Error {
 public:
  ParameterTooSmall(std::string parameter, const std::string& what)
      : Error(what), parameter_(std::move(parameter)) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

class StepFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace demi
