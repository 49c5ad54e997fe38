#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mpguard::cli {

// Runs one subcommand of {synth, profile, count, detect, train-iforest,
// train-ocsvm, score, eval, plotdata}. Returns 0 on success, 1 on usage or
// validation errors, 2 on internal errors. Reports echo every resolved
// configuration value so a run can be reproduced from its output.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args);

} // namespace mpguard::cli
