//
// Copyright 2026 The Clinsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace clinsum {

/// Broad error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kArgument,  // caller violated a precondition
  kConfig,    // bad configuration value or missing resource
  kData,      // malformed or inconsistent input data
  kFormat,    // serialized text that does not parse
  kIo,        // file system failure
  kBackend,   // a pluggable backend broke its contract
  kInternal,  // an upstream invariant was violated
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kBackend: return "backend error";
    case ErrorKind::kInternal: return "internal error";
  }
  return "error";
}

/// Base exception. Every error names the module that raised it so the CLI
/// can print module-qualified messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

#define CLINSUM_DEFINE_ERROR(Name, Kind)                             \
  class Name : public Error {                                        \
   public:                                                           \
    Name(std::string module, const std::string& message)             \
        : Error(ErrorKind::Kind, std::move(module), message) {}      \
  };

CLINSUM_DEFINE_ERROR(ArgumentError, kArgument)
CLINSUM_DEFINE_ERROR(ConfigError, kConfig)
CLINSUM_DEFINE_ERROR(DataError, kData)
CLINSUM_DEFINE_ERROR(FormatError, kFormat)
CLINSUM_DEFINE_ERROR(IoError, kIo)
CLINSUM_DEFINE_ERROR(BackendError, kBackend)
CLINSUM_DEFINE_ERROR(InternalError, kInternal)

#undef CLINSUM_DEFINE_ERROR

}  // namespace clinsum
