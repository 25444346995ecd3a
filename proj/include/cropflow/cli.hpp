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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cropflow/labels.hpp"
#include "cropflow/preprocess.hpp"
#include "cropflow/synth.hpp"
#include "cropflow/transfer.hpp"
#include "json.hpp"

namespace cropflow::cli {

inline constexpr std::string_view kPipelineSchema = "cropflow.pipeline/1";

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0: OpenMP default
  std::string output_dir = "cropflow-out";

  struct Inputs {
    std::string pixels;
    std::string labels;
    std::string histories;
    std::string artifact;
    std::string target_pixels;
    std::string target_labels;
    std::vector<std::string> reports;
    std::vector<std::string> timings;
  } inputs;

  PreprocessSpec preprocess;

  bool desk_profile = true;
  nlohmann::json model = {{"kind", "rf"}};
  std::size_t folds = 10;

  struct Transfer {
    std::string method = "direct";  // direct | finetune:R1..R4 | dann
    FinetuneConfig finetune;
    std::size_t target_train = 3000;
    std::size_t target_val = 1000;
    std::size_t target_test = 4000;
    std::size_t adapt = 4000;
    LambdaSchedule schedule = LambdaSchedule::Progressive;
    double lambda_scale = 1.0;
    std::size_t domain_hidden = 64;
  } transfer;

  struct Synth {
    std::string profile_file;
    std::array<std::size_t, kNumClasses> counts{100, 100, 100};
    synth::ShiftSpec shift;
    std::size_t histories = 0;
    synth::RotationMix rotation_mix;
  } synth;

  PatternMode label_mode = PatternMode::AnchorRelative;

  struct Dtw {
    std::optional<std::size_t> window;
    std::size_t max_per_class = 100;
    std::vector<Method> methods = {Method::Raw,        Method::WeightedWE, Method::LN7,
                                   Method::LN30,       Method::LN7Smoothed, Method::PhenoPeak};
  } dtw;

  // The model config with profile defaults applied and the pipeline seed
  // filled in unless the model sets its own.
  ModelConfig resolved_model() const;
};

nlohmann::json to_json(const PipelineConfig& c);
// Every level rejects unknown keys with a Config error.
PipelineConfig pipeline_from_json(const nlohmann::json& j);

// Entry point behind the `cropflow` executable. Returns the process exit
// code: 0 ok, 2 configuration error, 3 data error, 4 numeric divergence.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cropflow::cli
