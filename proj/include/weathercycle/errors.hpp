// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace weathercycle {

// Error taxonomy mirrors the CLI exit codes: usage 1, data 2, numeric 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointVersionError : DataError {
  explicit CheckpointVersionError(const std::string& msg) : DataError(msg) {}
};

struct CheckpointTruncatedError : DataError {
  explicit CheckpointTruncatedError(const std::string& msg) : DataError(msg) {}
};

struct CheckpointShapeError : DataError {
  explicit CheckpointShapeError(const std::string& msg) : DataError(msg) {}
};

}  // namespace weathercycle
