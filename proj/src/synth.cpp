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

#include "cropflow/synth.hpp"

#include <cmath>
#include <initializer_list>
#include <numeric>
#include <set>

#include "cropflow/error.hpp"
#include "cropflow/rng.hpp"

namespace cropflow::synth {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidSpec, what);
}

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  require(j.is_object(), where + " must be an object");
  const std::set<std::string_view> keys(allowed);
  for (const auto& [k, v] : j.items()) {
    require(keys.contains(k), "unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

double DoubleLogistic::operator()(double doy) const {
  return base + amplitude * (logistic(rise * (doy - green_up)) - logistic(fall * (doy - senescence)));
}

void DoubleLogistic::validate() const {
  require(amplitude > 0.0, "curve amplitude must be positive");
  require(rise > 0.0 && fall > 0.0, "curve rates must be positive");
  require(green_up < senescence, "green-up must precede senescence");
}

void Profile::validate() const {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    require(!classes[c].components.empty(),
            "class " + std::string(class_name(kAllClasses[c])) + " has no components");
    double w = 0.0;
    for (const auto& comp : classes[c].components) {
      comp.curve.validate();
      require(comp.weight >= 0.0, "component weight must be non-negative");
      w += comp.weight;
    }
    require(w > 0.0, "component weights must not all be zero");
  }
  require(sampling.revisit_days > 0 && sampling.sar_revisit_days > 0, "revisit must be positive");
  require(sampling.first_doy >= 1 && sampling.last_doy <= 366 &&
              sampling.first_doy <= sampling.last_doy,
          "sampling window must lie within 1..366");
  require(sampling.drop_probability >= 0.0 && sampling.drop_probability < 1.0,
          "drop probability must be in [0, 1)");
  require(jitter.timing_days >= 0 && jitter.amplitude >= 0 && jitter.base >= 0 &&
              jitter.rate >= 0 && jitter.reflectance >= 0 && jitter.backscatter_db >= 0,
          "jitter terms must be non-negative");
}

Profile default_profile() {
  Profile p;
  p.soil = {0.08, 0.11, 0.14, 0.20, 0.28, 0.22};

  Component corn;
  corn.curve = {0.10, 0.75, 165.0, 0.09, 245.0, 0.08};
  corn.vegetation = {0.030, 0.080, 0.040, 0.450, 0.200, 0.100};
  corn.vv_offset = -15.0;
  corn.vv_gain = 6.0;
  corn.vh_offset = -23.0;
  corn.vh_gain = 9.0;
  p.classes[0].components = {corn};

  Component soy;
  soy.curve = {0.10, 0.75, 180.0, 0.10, 255.0, 0.10};
  soy.vegetation = {0.030, 0.070, 0.035, 0.520, 0.170, 0.080};
  soy.vv_offset = -14.0;
  soy.vv_gain = 3.0;
  soy.vh_offset = -22.0;
  soy.vh_gain = 8.0;
  p.classes[1].components = {soy};

  Component flat;
  flat.weight = 0.35;
  flat.curve = {0.05, 0.08, 120.0, 0.05, 280.0, 0.05};
  flat.vegetation = {0.040, 0.080, 0.060, 0.350, 0.250, 0.150};
  flat.vv_offset = -17.0;
  flat.vv_gain = 2.0;
  flat.vh_offset = -25.0;
  flat.vh_gain = 3.0;
  Component early;
  early.weight = 0.35;
  early.curve = {0.10, 0.60, 100.0, 0.10, 175.0, 0.10};
  early.vegetation = {0.035, 0.085, 0.050, 0.420, 0.220, 0.110};
  early.vv_offset = -15.0;
  early.vv_gain = 4.0;
  early.vh_offset = -23.0;
  early.vh_gain = 6.0;
  Component low;
  low.weight = 0.30;
  low.curve = {0.15, 0.30, 140.0, 0.06, 270.0, 0.05};
  low.vegetation = {0.040, 0.090, 0.050, 0.380, 0.230, 0.120};
  low.vv_offset = -16.0;
  low.vv_gain = 3.0;
  low.vh_offset = -24.0;
  low.vh_gain = 5.0;
  p.classes[2].components = {flat, early, low};
  return p;
}

nlohmann::json profile_to_json(const Profile& p) {
  nlohmann::json classes;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& comp : p.classes[c].components) {
      const auto& k = comp.curve;
      comps.push_back({{"weight", comp.weight},
                       {"curve",
                        {{"base", k.base},
                         {"amplitude", k.amplitude},
                         {"green_up", k.green_up},
                         {"rise", k.rise},
                         {"senescence", k.senescence},
                         {"fall", k.fall}}},
                       {"vegetation", comp.vegetation},
                       {"sar",
                        {{"vv_offset", comp.vv_offset},
                         {"vv_gain", comp.vv_gain},
                         {"vh_offset", comp.vh_offset},
                         {"vh_gain", comp.vh_gain}}}});
    }
    classes[std::string(class_name(kAllClasses[c]))] = comps;
  }
  const auto& j = p.jitter;
  const auto& s = p.sampling;
  return {{"schema", "cropflow.synth-profile/1"},
          {"soil", p.soil},
          {"classes", classes},
          {"jitter",
           {{"timing_days", j.timing_days},
            {"amplitude", j.amplitude},
            {"base", j.base},
            {"rate", j.rate},
            {"reflectance", j.reflectance},
            {"backscatter_db", j.backscatter_db}}},
          {"sampling",
           {{"first_doy", s.first_doy},
            {"last_doy", s.last_doy},
            {"revisit_days", s.revisit_days},
            {"drop_probability", s.drop_probability},
            {"sar", s.sar},
            {"sar_first_doy", s.sar_first_doy},
            {"sar_revisit_days", s.sar_revisit_days}}}};
}

Profile profile_from_json(const nlohmann::json& j) {
  Profile p = default_profile();
  try {
    check_keys(j, {"schema", "soil", "classes", "jitter", "sampling"}, "profile");
    if (j.contains("schema")) {
      require(j["schema"] == "cropflow.synth-profile/1", "unsupported profile schema");
    }
    read(j, "soil", p.soil);
    if (j.contains("classes")) {
      check_keys(j["classes"], {"Corn", "Soybean", "Other"}, "profile.classes");
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const std::string name(class_name(kAllClasses[c]));
        if (!j["classes"].contains(name)) continue;
        std::vector<Component> comps;
        for (const auto& jc : j["classes"][name]) {
          check_keys(jc, {"weight", "curve", "vegetation", "sar"}, "component");
          Component comp;
          read(jc, "weight", comp.weight);
          if (jc.contains("curve")) {
            const auto& k = jc["curve"];
            check_keys(k, {"base", "amplitude", "green_up", "rise", "senescence", "fall"}, "curve");
            read(k, "base", comp.curve.base);
            read(k, "amplitude", comp.curve.amplitude);
            read(k, "green_up", comp.curve.green_up);
            read(k, "rise", comp.curve.rise);
            read(k, "senescence", comp.curve.senescence);
            read(k, "fall", comp.curve.fall);
          }
          read(jc, "vegetation", comp.vegetation);
          if (jc.contains("sar")) {
            const auto& s = jc["sar"];
            check_keys(s, {"vv_offset", "vv_gain", "vh_offset", "vh_gain"}, "sar");
            read(s, "vv_offset", comp.vv_offset);
            read(s, "vv_gain", comp.vv_gain);
            read(s, "vh_offset", comp.vh_offset);
            read(s, "vh_gain", comp.vh_gain);
          }
          comps.push_back(comp);
        }
        p.classes[c].components = std::move(comps);
      }
    }
    if (j.contains("jitter")) {
      const auto& k = j["jitter"];
      check_keys(k, {"timing_days", "amplitude", "base", "rate", "reflectance", "backscatter_db"},
                 "jitter");
      read(k, "timing_days", p.jitter.timing_days);
      read(k, "amplitude", p.jitter.amplitude);
      read(k, "base", p.jitter.base);
      read(k, "rate", p.jitter.rate);
      read(k, "reflectance", p.jitter.reflectance);
      read(k, "backscatter_db", p.jitter.backscatter_db);
    }
    if (j.contains("sampling")) {
      const auto& k = j["sampling"];
      check_keys(k, {"first_doy", "last_doy", "revisit_days", "drop_probability", "sar",
                     "sar_first_doy", "sar_revisit_days"},
                 "sampling");
      read(k, "first_doy", p.sampling.first_doy);
      read(k, "last_doy", p.sampling.last_doy);
      read(k, "revisit_days", p.sampling.revisit_days);
      read(k, "drop_probability", p.sampling.drop_probability);
      read(k, "sar", p.sampling.sar);
      read(k, "sar_first_doy", p.sampling.sar_first_doy);
      read(k, "sar_revisit_days", p.sampling.sar_revisit_days);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

void ShiftSpec::validate() const {
  require(std::isfinite(phenology_shift_days), "phenology shift must be finite");
  require(amplitude_scale > 0.0, "amplitude scale must be positive");
  double total = 0.0;
  for (double b : class_balance) {
    require(b >= 0.0, "class balance entries must be non-negative");
    total += b;
  }
  require(std::abs(total - 1.0) < 1e-9, "class balance must sum to 1");
  require(cloud_probability >= 0.0 && cloud_probability < 1.0,
          "cloud probability must be in [0, 1)");
  require(spike_magnitude >= 0.0 && extra_reflectance_noise >= 0.0,
          "noise terms must be non-negative");
}

nlohmann::json shift_to_json(const ShiftSpec& s) {
  return {{"phenology_shift_days", s.phenology_shift_days},
          {"amplitude_scale", s.amplitude_scale},
          {"sensor_offset", s.sensor_offset},
          {"class_balance", s.class_balance},
          {"cloud_probability", s.cloud_probability},
          {"spike_magnitude", s.spike_magnitude},
          {"extra_reflectance_noise", s.extra_reflectance_noise}};
}

ShiftSpec shift_from_json(const nlohmann::json& j) {
  ShiftSpec s;
  try {
    check_keys(j, {"phenology_shift_days", "amplitude_scale", "sensor_offset", "class_balance",
                   "cloud_probability", "spike_magnitude", "extra_reflectance_noise"},
               "shift");
    read(j, "phenology_shift_days", s.phenology_shift_days);
    read(j, "amplitude_scale", s.amplitude_scale);
    read(j, "sensor_offset", s.sensor_offset);
    read(j, "class_balance", s.class_balance);
    read(j, "cloud_probability", s.cloud_probability);
    read(j, "spike_magnitude", s.spike_magnitude);
    read(j, "extra_reflectance_noise", s.extra_reflectance_noise);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("shift: ") + e.what());
  }
  s.validate();
  return s;
}

std::array<std::size_t, kNumClasses> counts_from_balance(
    std::size_t total, const std::array<double, kNumClasses>& balance) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> frac{};
  std::size_t given = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = balance[c] * static_cast<double>(total);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    frac[c] = exact - static_cast<double>(counts[c]);
    given += counts[c];
  }
  while (given < total) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (frac[c] > frac[best]) best = c;
    }
    ++counts[best];
    frac[best] = -1.0;
    ++given;
  }
  return counts;
}

namespace {

ObservationSeries make_pixel(const Profile& profile, ClassLabel label, const ShiftSpec& shift,
                             std::string id, Rng& rng) {
  const auto& comps = profile.classes[static_cast<std::size_t>(class_index(label))].components;
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  double u = rng.uniform() * wsum;
  std::size_t pick = 0;
  while (pick + 1 < comps.size() && u >= comps[pick].weight) {
    u -= comps[pick].weight;
    ++pick;
  }
  const Component& comp = comps[pick];
  const Jitter& jit = profile.jitter;

  DoubleLogistic k = comp.curve;
  k.green_up += rng.normal(0.0, jit.timing_days) + shift.phenology_shift_days;
  k.senescence += rng.normal(0.0, jit.timing_days) + shift.phenology_shift_days;
  if (k.senescence < k.green_up + 10.0) k.senescence = k.green_up + 10.0;
  k.amplitude *= std::max(0.05, 1.0 + rng.normal(0.0, jit.amplitude)) * shift.amplitude_scale;
  k.base += rng.normal(0.0, jit.base);
  k.rise *= std::max(0.2, 1.0 + rng.normal(0.0, jit.rate));
  k.fall *= std::max(0.2, 1.0 + rng.normal(0.0, jit.rate));

  const double refl_sd = jit.reflectance + shift.extra_reflectance_noise;
  const Sampling& s = profile.sampling;
  std::vector<SpectralObservation> obs;
  for (int d = s.first_doy; d <= s.last_doy; d += s.revisit_days) {
    if (rng.bernoulli(s.drop_probability)) continue;
    const double g = std::clamp(k(d), 0.0, 1.0);
    SpectralObservation o;
    o.doy = d;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      o.bands[b] = profile.soil[b] * (1.0 - g) + comp.vegetation[b] * g +
                   shift.sensor_offset[b] + rng.normal(0.0, refl_sd);
    }
    o.qa_valid = !rng.bernoulli(shift.cloud_probability);
    if (!o.qa_valid) {
      const double spike = shift.spike_magnitude * (0.6 + 0.4 * rng.uniform());
      for (double& v : o.bands) v += spike;
    }
    obs.push_back(o);
  }
  std::vector<SarObservation> sar;
  if (s.sar) {
    for (int d = s.sar_first_doy; d <= s.last_doy; d += s.sar_revisit_days) {
      const double g = std::clamp(k(d), 0.0, 1.0);
      sar.push_back({d, comp.vv_offset + comp.vv_gain * g + rng.normal(0.0, jit.backscatter_db),
                     comp.vh_offset + comp.vh_gain * g + rng.normal(0.0, jit.backscatter_db)});
    }
  }
  if (obs.empty()) {
    // Keep at least one acquisition so the pixel stays representable.
    const int d = s.first_doy + (s.last_doy - s.first_doy) / 2;
    const double g = std::clamp(k(d), 0.0, 1.0);
    SpectralObservation o;
    o.doy = d;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      o.bands[b] = profile.soil[b] * (1.0 - g) + comp.vegetation[b] * g + shift.sensor_offset[b];
    }
    obs.push_back(o);
  }
  return make_series(std::move(id), std::move(obs), std::move(sar));
}

}  // namespace

Dataset generate(const Profile& profile, const std::array<std::size_t, kNumClasses>& counts,
                 const ShiftSpec& shift, std::uint64_t seed) {
  profile.validate();
  shift.validate();
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  require(n >= 1, "at least one pixel must be requested");
  std::vector<ClassLabel> classes;
  for (std::size_t c = 0; c < kNumClasses; ++c) classes.insert(classes.end(), counts[c], kAllClasses[c]);
  Rng order(mix_seed(seed, ~std::uint64_t{0}));
  order.shuffle(classes);

  const auto width = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  Dataset out;
  out.pixels.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    std::string id = std::to_string(i / width) + "_" + std::to_string(i % width);
    out.labels.push_back({id, classes[i]});
    out.pixels.push_back(make_pixel(profile, classes[i], shift, std::move(id), rng));
  }
  return out;
}

double peak_doy(const DoubleLogistic& curve, double lo, double hi) {
  double best = lo;
  double best_v = curve(lo);
  const auto steps = static_cast<long>(std::llround((hi - lo) / 0.01));
  for (long i = 1; i <= steps; ++i) {
    const double d = lo + 0.01 * static_cast<double>(i);
    const double v = curve(d);
    if (v > best_v) {
      best_v = v;
      best = d;
    }
  }
  return best;
}

void RotationMix::validate() const {
  const double parts[] = {continuous_corn, continuous_soy, corn_soy, other_soy, random};
  double total = 0.0;
  for (double p : parts) {
    require(p >= 0.0, "rotation mix entries must be non-negative");
    total += p;
  }
  require(std::abs(total - 1.0) < 1e-9, "rotation mix must sum to 1");
}

std::vector<CropHistory> generate_histories(std::size_t n, const RotationMix& mix,
                                            std::uint64_t seed) {
  mix.validate();
  static constexpr std::string_view kAllCodes[] = {"C", "S", "W", "A", "G"};
  const double cum[] = {mix.continuous_corn, mix.continuous_soy, mix.corn_soy, mix.other_soy};
  std::vector<CropHistory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    double u = rng.uniform();
    std::size_t family = 0;
    while (family < 4 && u >= cum[family]) {
      u -= cum[family];
      ++family;
    }
    CropHistory h;
    h.pixel_id = "h" + std::to_string(i);
    h.codes.resize(kHistoryYears);
    switch (family) {
      case 0:
        std::fill(h.codes.begin(), h.codes.end(), "C");
        break;
      case 1:
        std::fill(h.codes.begin(), h.codes.end(), "S");
        break;
      case 2: {
        const bool corn_first = rng.bernoulli(0.5);
        for (std::size_t y = 0; y < kHistoryYears; ++y) {
          h.codes[y] = ((y % 2 == 0) == corn_first) ? "C" : "S";
        }
        break;
      }
      case 3:
        for (std::size_t y = 0; y < kHistoryYears; ++y) {
          h.codes[y] = y % 2 == 1 ? "S" : std::string(kOtherCodes[rng.uniform_index(kOtherCodes.size())]);
        }
        break;
      default:
        for (auto& code : h.codes) code = std::string(kAllCodes[rng.uniform_index(5)]);
        break;
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace cropflow::synth
