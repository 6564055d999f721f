#pragma once

#include <stdexcept>
#include <string>

namespace saber {

// Error taxonomy. Config errors map to CLI exit code 2, everything else to 1.
enum class ErrorKind {
  Io,            // file system failure (message names the file)
  Format,        // malformed or inconsistent file content
  SizeMismatch,  // declared vs actual data size disagree
  Version,       // unknown dataset/truth format version
  Config,        // invalid parameter or configuration value
  Numeric,       // singular / ill-conditioned / unstable computation
  Data,          // dataset unusable for the requested analysis
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// Warnings go to stderr; they never change results, only report repairs
// (e.g. re-sorting an unsorted event list) or dropped items.
void log_warn(const std::string& message);

}  // namespace saber
