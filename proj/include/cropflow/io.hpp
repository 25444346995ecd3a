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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cropflow/series.hpp"

namespace cropflow::io {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Pixel CSV: pixel_id,doy,blue,green,red,nir,swir1,swir2,qa_valid[,vv,vh]
// A row with empty optical fields carries SAR only. Pixels keep the order of
// their first row.
std::vector<ObservationSeries> read_pixel_csv(std::istream& in);
std::vector<ObservationSeries> read_pixel_csv(const std::filesystem::path& path);
void write_pixel_csv(std::ostream& out, std::span<const ObservationSeries> pixels);

struct PixelLabel {
  std::string pixel_id;
  ClassLabel label = ClassLabel::Other;
};

// Truth / label CSV: pixel_id,label
std::vector<PixelLabel> read_labels_csv(std::istream& in);
std::vector<PixelLabel> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(std::ostream& out, std::span<const PixelLabel> labels);

// RegularSeries CSV: pixel_id,step,doy,<channel...>. All series in one file
// share the channel set.
void write_regular_csv(std::ostream& out, std::span<const RegularSeries> series);
std::vector<RegularSeries> read_regular_csv(std::istream& in, Method method);

}  // namespace cropflow::io
