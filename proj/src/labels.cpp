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

#include "cropflow/labels.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace cropflow {

std::optional<ClassLabel> classify_trusted(const CropHistory& history, PatternMode mode) {
  const auto& c = history.codes;
  if (c.size() != kHistoryYears) {
    throw Error(ErrorKind::MalformedHistory,
                "history for " + history.pixel_id + " has " + std::to_string(c.size()) +
                    " years, need 8");
  }
  const std::string& anchor = c.back();
  std::optional<ClassLabel> label;
  if (anchor == "C") label = ClassLabel::Corn;
  if (anchor == "S") label = ClassLabel::Soybean;
  if (!label) return std::nullopt;

  bool continuous = true;
  for (const auto& code : c) continuous = continuous && code == anchor;
  if (continuous) return label;

  // X-A-X-A-X-A-X-A with A the anchor in the odd (0-based) years.
  for (std::size_t i = 0; i < kHistoryYears; ++i) {
    if (i % 2 == 1) {
      if (c[i] != anchor) return std::nullopt;
      continue;
    }
    const bool x_ok = mode == PatternMode::AnchorRelative ? c[i] != anchor
                                                          : (c[i] != "C" && c[i] != "S");
    if (!x_ok) return std::nullopt;
  }
  return label;
}

TrustedRatio compute_trusted_ratio(const TrustedCounts& counts) {
  const std::size_t den = counts.cdl_corn + counts.cdl_soy;
  if (den == 0) {
    throw Error(ErrorKind::ZeroDenominator, "no CDL corn or soybean pixels");
  }
  TrustedRatio r;
  r.counts = counts;
  r.p_trusted = static_cast<double>(counts.trusted_corn + counts.trusted_soy) /
                static_cast<double>(den);
  return r;
}

std::size_t downsample_size(double p_trusted, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p_trusted * static_cast<double>(n) + 0.5));
}

TrustedLabelSet build_trusted_labels(std::span<const CropHistory> histories, PatternMode mode,
                                     std::uint64_t seed) {
  TrustedCounts counts;
  TrustedLabelSet out;
  std::vector<std::string> other_ids;
  for (const auto& h : histories) {
    const auto trusted = classify_trusted(h, mode);
    const std::string& study = h.codes.back();
    if (study == "C") {
      ++counts.cdl_corn;
    } else if (study == "S") {
      ++counts.cdl_soy;
    } else {
      ++counts.cdl_other;
      other_ids.push_back(h.pixel_id);
    }
    if (trusted == ClassLabel::Corn) ++counts.trusted_corn;
    if (trusted == ClassLabel::Soybean) ++counts.trusted_soy;
    if (trusted) out.labels.push_back({h.pixel_id, *trusted});
  }
  out.ratio = compute_trusted_ratio(counts);
  for (auto& id : downsample_other(other_ids, out.ratio, seed)) {
    out.labels.push_back({std::move(id), ClassLabel::Other});
  }
  return out;
}

std::vector<CropHistory> read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "history CSV is empty");
  const auto header = io::split_fields(line);
  if (header.size() != 1 + kHistoryYears || header[0] != "pixel_id") {
    throw Error(ErrorKind::Parse, "history CSV header must be pixel_id,y1..y8");
  }
  std::vector<CropHistory> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_fields(line);
    CropHistory h;
    h.pixel_id = std::string(f[0]);
    for (std::size_t i = 1; i < f.size(); ++i) h.codes.emplace_back(f[i]);
    if (h.codes.size() != kHistoryYears) {
      throw Error(ErrorKind::MalformedHistory, "history row for " + h.pixel_id +
                                                   " does not have 8 years");
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<CropHistory> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_history_csv(in);
}

void write_history_csv(std::ostream& out, std::span<const CropHistory> histories) {
  out << "pixel_id";
  for (std::size_t i = 1; i <= kHistoryYears; ++i) out << ",y" << i;
  out << '\n';
  for (const auto& h : histories) {
    out << h.pixel_id;
    for (const auto& c : h.codes) out << ',' << c;
    out << '\n';
  }
}

}  // namespace cropflow
