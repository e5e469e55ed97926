#pragma once

#include <stdexcept>
#include <string>

namespace htq {

/// Raised for every contract violation inside the library. The message names
/// the failing operation or assumption.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace htq
