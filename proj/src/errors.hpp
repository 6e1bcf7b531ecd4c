#pragma once

#include <stdexcept>

namespace tpdr {

// Filesystem failures: unopenable paths, short writes, missing files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed content in an otherwise readable input.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric breakdown at runtime (divergence, non-finite values).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tpdr
