#pragma once

#include <stdexcept>
#include <string>

namespace ncm {

enum class ErrorKind {
  usage,
  format,
  truncation,
  data,
  corruption,
  numeric,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::format: return "format";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::data: return "data";
    case ErrorKind::corruption: return "corruption";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

// Process exit code for each error kind: 2 usage, 3 format, 4 data, 5 numeric degeneracy.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::format:
    case ErrorKind::truncation: return 3;
    case ErrorKind::data:
    case ErrorKind::corruption: return 4;
    case ErrorKind::numeric: return 5;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace ncm
