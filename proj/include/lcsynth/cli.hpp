#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcsynth {

/// Runs one subcommand. `args` excludes the program name. Failures print a
/// single-line diagnostic to `err` and return nonzero.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lcsynth
