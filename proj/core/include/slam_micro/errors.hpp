// Copyright 2026 The slam-micro Authors
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

#ifndef SLAM_MICRO_ERRORS_HPP_
#define SLAM_MICRO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace slam_micro {

// Every failure surfaced by the library derives from Error. The kind lets
// callers (the CLI in particular) map failures onto exit codes without
// string matching.
enum class ErrorKind {
  kParse,
  kResolution,
  kAssembly,
  kPolicy,
  kShape,
  kVocabulary,
  kIo,
  kContract,
  kFormat,
  kDigestMismatch,
  kMissingParameter,
  kEmptyFeature,
  kTooShort,
  kTemplate,
  kSize,
  kUndefinedRate,
  kNumeric,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace slam_micro

#endif  // SLAM_MICRO_ERRORS_HPP_
