#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rhem {

/// Entry point of the `rhem` command. Returns 0 on success, 2 on invalid
/// input or configuration and 3 when the optimizer fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rhem
