#ifndef THERMOSCOPE_CLI_HPP
#define THERMOSCOPE_CLI_HPP

#include <string>
#include <vector>

namespace thermoscope {

// Front end behind the thermoscope binary; args exclude the program name.
// Exit codes: 0 success, 2 malformed input, 3 solver failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace thermoscope

#endif
