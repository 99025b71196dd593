#pragma once

#include <stdexcept>
#include <string>

namespace roiforge {

/// Bad input data or a failed validation (missing file, geometry mismatch,
/// malformed log). Maps to CLI exit status 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid invocation or configuration. Maps to CLI exit status 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace roiforge
