#pragma once

#include <stdexcept>
#include <string>

namespace histcal {

enum class ErrorKind {
  usage,
  io,
  parse,
  data,
  invalid_configuration,
};

// Every failure raised by the library carries a kind so the CLI can map it to
// an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) {
  return Error(ErrorKind::invalid_configuration, "invalid configuration: " + what);
}

inline Error data_error(const std::string& what) {
  return Error(ErrorKind::data, "data error: " + what);
}

inline Error parse_error(const std::string& what) {
  return Error(ErrorKind::parse, "parse error: " + what);
}

inline Error io_error(const std::string& what) {
  return Error(ErrorKind::io, "I/O error: " + what);
}

inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::usage, "usage error: " + what);
}

// 0 success, 2 usage, 3 data (I/O and parse included), 4 infeasible configuration.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage:
      return 2;
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::data:
      return 3;
    case ErrorKind::invalid_configuration:
      return 4;
  }
  return 1;
}

}  // namespace histcal
