#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gst {

enum class ErrorKind {
  InvalidArgument,
  Layering,
  InvalidGrid,
  DimensionMismatch,
  Numerical,
  Parse,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `kind` is what the CLI reports in its error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gst
