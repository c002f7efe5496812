// Copyright 2026 The HREB-CRF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hreb {

// Error categories. The C API and the CLI map these onto exit codes.
enum class ErrorKind {
  kDimension,   // shape mismatch between operands
  kContract,    // precondition violated by the caller
  kNumeric,     // NaN/Inf produced by an op
  kDegenerate,  // fully masked attention row, empty normalizer
  kConfig,      // bad configuration key or value
  kData,        // unreadable or malformed corpus/embedding file
  kCheckpoint,  // incompatible or corrupt checkpoint
  kDivergence,  // NaN loss or gradient during training
  kOracle,      // verification harness detected non-determinism
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace hreb
