#pragma once

#include <stdexcept>
#include <string>

namespace dacd {

/// Base exception for all library failures. Messages carry the offending
/// path or value so CLI users can act on them directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dacd
