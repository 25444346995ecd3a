// Copyright 2026 The Cropflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cropflow/error.hpp"

namespace cropflow {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AllMasked: return "AllMasked";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::MissingBand: return "MissingBand";
    case ErrorKind::MalformedHistory: return "MalformedHistory";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::NotScalar: return "NotScalar";
    case ErrorKind::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::UnsupportedModelKind: return "UnsupportedModelKind";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidSpec:
    case ErrorKind::UnsupportedModelKind:
      return 2;
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::SingularSystem:
      return 4;
    default:
      return 3;
  }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what),
      kind_(kind) {}

}  // namespace cropflow
