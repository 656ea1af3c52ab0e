#pragma once

#include <stdexcept>
#include <string>

namespace occtool {

// Bad user input (malformed files, inconsistent series, invalid flags).
// The CLI maps this to exit code 1; anything else escaping main is exit 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace occtool
