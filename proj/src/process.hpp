#pragma once

#include <string>
#include <vector>

namespace cadet::detail {

// Runs argv[0] from PATH with stdout and stderr discarded; returns the exit
// status, or -1 if the program could not be started.
int run_process(const std::vector<std::string>& argv);

} // namespace cadet::detail
