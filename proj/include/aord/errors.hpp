#pragma once

#include <stdexcept>
#include <string>

namespace aord {

// Invalid configuration, flags, or shapes. Detected before any compute.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed feature file; the message names the offending line.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-finite values met during sampling or training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aord
