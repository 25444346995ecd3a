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

// Labeled datasets drawn from the synthetic generator, already preprocessed.

#include <array>
#include <cstddef>
#include <cstdint>

#include "cropflow/dataset.hpp"
#include "cropflow/preprocess.hpp"
#include "cropflow/synth.hpp"

namespace cropflow::testing {

struct SynthRequest {
  std::array<std::size_t, kNumClasses> counts{40, 40, 40};
  synth::ShiftSpec shift;
  std::uint64_t seed = 1;
  Method method = Method::LN7;
  ChannelSet channels = ChannelSet::Optical;
  synth::Profile profile = synth::default_profile();
};

LabeledDataset synthetic_dataset(const SynthRequest& req);

// One tight cluster per class, the clusters 2 apart on every feature.
SampleMatrix separable_matrix(std::size_t per_class, std::size_t steps, std::size_t channels,
                              std::uint64_t seed);

}  // namespace cropflow::testing
