#pragma once

#include <stdexcept>

namespace hdsl {

// File-system or stream failure (missing file, unwritable path).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hdsl
