#pragma once

#include <stdexcept>
#include <string>

namespace qklab {

/// Invalid user input: bad config, missing file, malformed data.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numerical self-check failed; signals a backend bug, not bad input.
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qklab
