// Copyright 2026 The Warbler Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace warbler {

enum class ErrorKind {
  kParse,
  kValidation,
  kRange,
  kAlignment,
  kShape,
  kIo,
  kConfig,
};

std::string_view ErrorKindName(ErrorKind kind);

/// Every failure in the library surfaces as this exception. The kind is
/// stable and is what the CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Emits a warning on stderr unless warnings were silenced.
void Warn(std::string_view message);
void SetWarningsEnabled(bool enabled);

}  // namespace warbler
