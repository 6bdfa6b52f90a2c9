#pragma once

#include <stdexcept>
#include <string>

namespace vagan {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError      -> exit 2 (bad invocation, unknown method, ...)
//   ValidationError -> exit 3 (bad config/spec field, shape mismatch, ...)
//   anything else   -> exit 4 (runtime failure)
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vagan
