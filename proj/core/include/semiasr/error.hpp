// semiasr/error.hpp
#pragma once

#include <stdexcept>
#include <string>

namespace semiasr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value that should be finite is NaN or infinite. `where` names the op or stage.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string where, const std::string& what)
      : Error(what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Gradient requested through an op that has no derivative (e.g. hard argmax).
class NonDifferentiableError : public Error {
 public:
  explicit NonDifferentiableError(std::string op)
      : Error("gradient requested through non-differentiable op '" + op + "'"), op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// Invalid configuration value. `path` is the dotted config path of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)), message_(message) {}
  const std::string& path() const { return path_; }
  const std::string& message() const { return message_; }

 private:
  std::string path_;
  std::string message_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace semiasr
