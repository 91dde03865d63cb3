#pragma once

#include <string>
#include <vector>

namespace semcom {

// Exit codes: 0 ok, 2 input error, 3 infeasible instance, 4 I/O error.
// Audit findings (subcommand `audit`) report 1.
int run_cli(const std::vector<std::string>& args);

}  // namespace semcom
