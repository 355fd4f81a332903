// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nurl {

/// Invalid or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (wrong length, k > n, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Missing key in a keyed store (hint bank, task set).
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Numerical failure during training (non-finite gradient or objective).
/// The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nurl
