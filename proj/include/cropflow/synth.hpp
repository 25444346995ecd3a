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
#include <string>
#include <vector>

#include "cropflow/io.hpp"
#include "cropflow/labels.hpp"
#include "cropflow/series.hpp"
#include "json.hpp"

namespace cropflow::synth {

// Latent greenness g(t) = base + amplitude * (s(rise*(t - green_up)) -
// s(fall*(t - senescence))) with s the logistic function.
struct DoubleLogistic {
  double base = 0.1;
  double amplitude = 0.6;
  double green_up = 150.0;
  double rise = 0.08;
  double senescence = 250.0;
  double fall = 0.08;

  double operator()(double doy) const;
  // Throws InvalidSpec unless amplitude > 0, rates > 0 and green_up < senescence.
  void validate() const;
};

// One curve family of a class, with its own vegetation endmember and SAR
// response. The "other" class mixes several.
struct Component {
  double weight = 1.0;
  DoubleLogistic curve;
  BandValues vegetation{};
  // Backscatter in dB: offset + gain * greenness.
  double vv_offset = -14.0;
  double vv_gain = 4.0;
  double vh_offset = -22.0;
  double vh_gain = 7.0;
};

struct ClassProfile {
  std::vector<Component> components;
};

struct Jitter {
  double timing_days = 5.0;      // sd of green-up and senescence dates
  double amplitude = 0.08;       // relative sd of amplitude
  double base = 0.02;            // sd of base greenness
  double rate = 0.1;             // relative sd of rise and fall rates
  double reflectance = 0.01;     // sd of per-observation reflectance noise
  double backscatter_db = 0.8;   // sd of per-observation SAR noise
};

struct Sampling {
  int first_doy = 80;
  int last_doy = 310;
  int revisit_days = 8;
  double drop_probability = 0.1;  // acquisition missing entirely
  bool sar = true;
  int sar_first_doy = 82;
  int sar_revisit_days = 6;
};

struct Profile {
  BandValues soil{};
  std::array<ClassProfile, kNumClasses> classes;
  Jitter jitter;
  Sampling sampling;

  void validate() const;
};

// The profile shipped as data/default_profile.json.
Profile default_profile();
nlohmann::json profile_to_json(const Profile& p);
// Unknown keys throw InvalidSpec.
Profile profile_from_json(const nlohmann::json& j);

struct ShiftSpec {
  double phenology_shift_days = 0.0;
  double amplitude_scale = 1.0;
  BandValues sensor_offset{};
  std::array<double, kNumClasses> class_balance{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double cloud_probability = 0.0;
  double spike_magnitude = 0.3;
  double extra_reflectance_noise = 0.0;  // added sd on top of the profile's

  void validate() const;
};

nlohmann::json shift_to_json(const ShiftSpec& s);
ShiftSpec shift_from_json(const nlohmann::json& j);

struct Dataset {
  std::vector<ObservationSeries> pixels;
  std::vector<io::PixelLabel> labels;
};

// Class counts for `total` pixels following the balance (largest remainder).
std::array<std::size_t, kNumClasses> counts_from_balance(
    std::size_t total, const std::array<double, kNumClasses>& balance);

// Pixels are named "<row>_<col>" on a square-ish grid in generation order;
// the class order is a seeded shuffle. Each pixel draws from its own stream
// mix_seed(seed, index). Throws InvalidSpec.
Dataset generate(const Profile& profile, const std::array<std::size_t, kNumClasses>& counts,
                 const ShiftSpec& shift, std::uint64_t seed);

// Peak DOY of the closed-form curve, by dense search at 0.01-day steps.
double peak_doy(const DoubleLogistic& curve, double lo = 1.0, double hi = 365.0);

struct RotationMix {
  double continuous_corn = 0.2;
  double continuous_soy = 0.2;
  double corn_soy = 0.2;
  double other_soy = 0.2;
  double random = 0.2;

  void validate() const;
};

// Codes used for non-target crops in generated histories.
inline constexpr std::array<std::string_view, 3> kOtherCodes = {"W", "A", "G"};

std::vector<CropHistory> generate_histories(std::size_t n, const RotationMix& mix,
                                            std::uint64_t seed);

}  // namespace cropflow::synth
