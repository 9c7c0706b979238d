// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hybridct {

/// Bad configuration, arguments or input contracts. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failures while doing work (I/O, corrupt data, numerical blow-ups). Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HYBRIDCT_REQUIRE(cond, msg)                 \
  do {                                              \
    if (!(cond)) throw ::hybridct::ValidationError(msg); \
  } while (0)

}  // namespace hybridct
