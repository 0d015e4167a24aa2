#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace credfed {

// Base for every error raised by the library. kind() is a stable,
// machine-parseable class name used by the CLI on failure.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension_error", m) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error("contract_error", m) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& m) : Error("range_error", m) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& m) : Error("parameter_error", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric_error", m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error("parse_error", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};

// Throws ContractError with `message` unless `condition` holds.
void require(bool condition, std::string_view message);

}  // namespace credfed
