#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neutralsum {

// Base class for every error the library raises. Callers that only need a
// message can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data does not match its declared shape (prediction files, graph JSON,
// probability vectors, config values of the wrong type).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A prompt template references a placeholder with no value.
class TemplateError : public Error {
 public:
  using Error::Error;
};

// Malformed textual table section. Line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-finite value produced inside the graph encoder.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Toy soft-prompt training diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// The fixed part of a prompt alone exceeds the input token budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Failures talking to a remote completion or model service.
class RemoteError : public Error {
 public:
  enum class Kind { kAuth, kTimeout, kEmptyCompletion, kTransient, kProtocol };

  RemoteError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A pipeline stage ran before the artifact it consumes exists.
class DependencyError : public Error {
 public:
  using Error::Error;
};

// Invalid or unresolvable configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace neutralsum
