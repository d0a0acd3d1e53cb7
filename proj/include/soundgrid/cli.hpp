#pragma once

#include <iosfwd>

namespace soundgrid {

/// Entry point of the `soundgrid` command. Returns 0 on success, 1 on a
/// usage error and 2 on a runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace soundgrid
