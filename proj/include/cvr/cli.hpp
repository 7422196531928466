#pragma once

#include <string>
#include <vector>

namespace cvr::cli {

// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace cvr::cli
