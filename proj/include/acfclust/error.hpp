#pragma once

#include <stdexcept>
#include <string>

namespace acfclust {

enum class ErrorKind {
  InvalidGrid,
  GridMismatch,
  EmptyMask,
  Precondition,
  Domain,
  DegenerateData,
  FitFailure,
  InsufficientData,
  InfiniteT,
  Config,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every library failure is reported through this type; `kind()` lets callers
// (the CLI in particular) map failures onto exit codes without string matching.
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

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) fail(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace acfclust
