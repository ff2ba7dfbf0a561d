// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace minicase {

enum class ErrorCode {
  ArityMismatch,
  ShapeMismatch,
  IndivisiblePack,
  TypeError,
  TypeMismatch,
  UnknownUnit,
  MissingEntry,
  Infeasible,
  NoStrategy,
  IllegalMerge,
  BadPermutation,
  MissingInput,
  ShardMismatch,
  CapacityViolation,
  Validation,
  Parse,
  Internal,
};

const char *error_code_name(ErrorCode code);

/// Exception carrying a machine-readable code; the CLI maps codes to exit
/// statuses.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace minicase
