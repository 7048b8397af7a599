#include "gst/cli.hpp"

int main(int argc, char** argv) { return gst::run_cli(argc, argv); }
