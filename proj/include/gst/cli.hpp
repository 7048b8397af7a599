#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gst {

/// Entry point of the `gst` command-line tool. Failures print a one-line JSON
/// record {"error": kind, "message": text} to `err` and return nonzero
/// (2 for usage errors, 1 otherwise).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace gst
