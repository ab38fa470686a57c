#pragma once

#include <string>
#include <vector>

namespace hct {

/// Entry point of the `hct` command-line tool. `args` excludes the program
/// name. Returns 0 on success, 1 on usage or config errors, 2 on data or
/// validation errors.
int cli_main(const std::vector<std::string>& args);

}  // namespace hct
