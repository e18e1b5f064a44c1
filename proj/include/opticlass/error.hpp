#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opticlass {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input bytes that cannot be turned into a dataset (bad header, bad file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value outside the domain of an operation (e.g. a non-positive wavelength).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied an invalid option or precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Serialized model is truncated, corrupt or of an unknown version.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a multi-stage pipeline, tagged with the stage that raised it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace opticlass
