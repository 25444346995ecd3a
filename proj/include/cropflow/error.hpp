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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cropflow {

enum class ErrorKind {
  // series-core / reconstruct
  AllMasked,
  TooFewObservations,
  SingularSystem,
  // indices
  MissingBand,
  // labels
  MalformedHistory,
  ZeroDenominator,
  // separability
  EmptySequence,
  TooFewSamples,
  // autodiff / models
  ShapeMismatch,
  InvalidTarget,
  NotScalar,
  EmptyTrainSet,
  NonFiniteLoss,
  // transfer
  FingerprintMismatch,
  UnsupportedModelKind,
  EmptyClass,
  InsufficientSamples,
  // eval
  LengthMismatch,
  TooFewValues,
  // synth / config / io
  InvalidSpec,
  Config,
  Io,
  Parse,
};

std::string_view error_kind_name(ErrorKind kind);

// Process exit code for a failure of this kind: 2 config, 3 data, 4 numeric.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return exit_code_for(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace cropflow
