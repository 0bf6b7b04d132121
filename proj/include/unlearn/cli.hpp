#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace unlearn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationFailure = 2;
inline constexpr int kReproduceMismatch = 3;
inline constexpr int kUsage = 64;

// `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace unlearn::cli
