#include "gst/error.hpp"

namespace gst {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Layering: return "layering";
    case ErrorKind::InvalidGrid: return "invalid_grid";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace gst
