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

#include "slam_micro/errors.hpp"

namespace slam_micro {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kResolution: return "ResolutionError";
    case ErrorKind::kAssembly: return "AssemblyError";
    case ErrorKind::kPolicy: return "PolicyError";
    case ErrorKind::kShape: return "ShapeError";
    case ErrorKind::kVocabulary: return "VocabularyError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kContract: return "ContractError";
    case ErrorKind::kFormat: return "FormatError";
    case ErrorKind::kDigestMismatch: return "DigestMismatch";
    case ErrorKind::kMissingParameter: return "MissingParameter";
    case ErrorKind::kEmptyFeature: return "EmptyFeatureError";
    case ErrorKind::kTooShort: return "TooShortError";
    case ErrorKind::kTemplate: return "TemplateError";
    case ErrorKind::kSize: return "SizeError";
    case ErrorKind::kUndefinedRate: return "UndefinedRate";
    case ErrorKind::kNumeric: return "NumericError";
  }
  return "Error";
}

}  // namespace slam_micro
