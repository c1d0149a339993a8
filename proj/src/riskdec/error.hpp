#pragma once

#include <stdexcept>
#include <string>

namespace riskdec {

// Error categories mirror the process exit codes: 2 = caller/contract
// problems, 3 = bad data or file formats, 4 = numerical failures.
enum class ErrorKind { usage = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

  static Error usage(const std::string& msg) { return {ErrorKind::usage, msg}; }
  static Error data(const std::string& msg) { return {ErrorKind::data, msg}; }
  static Error numeric(const std::string& msg) { return {ErrorKind::numeric, msg}; }

 private:
  ErrorKind kind_;
};

}  // namespace riskdec
