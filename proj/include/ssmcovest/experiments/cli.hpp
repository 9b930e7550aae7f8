#pragma once

#include <ostream>

namespace ssmcovest::experiments {

// Subcommands simulate, estimate, experiment and report. Returns 0 on
// success, 1 on configuration or I/O errors, 2 when an estimation fails.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ssmcovest::experiments
