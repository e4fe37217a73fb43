#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsvs {

enum class ErrorKind {
  InvalidArgument,
  MissingColumn,
  ParseError,
  EmptyData,
  ConstantColumn,
  RankDeficient,
  NonConvergence,
  DegenerateFolds,
  DegenerateComponent,
  NegativeVariance,
  NotOverIdentified,
  InfeasibleDesign,
  EmptySelection,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; `kind()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::InvalidArgument, message);
}

}  // namespace tsvs
