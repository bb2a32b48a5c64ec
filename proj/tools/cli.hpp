#ifndef AWE_CLI_HPP
#define AWE_CLI_HPP

namespace awe::cli {

// Entry point behind the awe binary; exposed for in-process testing.
// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace awe::cli

#endif  // AWE_CLI_HPP
