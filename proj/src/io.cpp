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

#include "cropflow/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "cropflow/error.hpp"

namespace cropflow::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_flag(std::string_view s) {
  if (s == "1" || s == "true" || s == "True") return true;
  if (s == "0" || s == "false" || s == "False" || s.empty()) return false;
  throw Error(ErrorKind::Parse, "bad qa_valid flag: " + std::string(s));
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

std::vector<ObservationSeries> read_pixel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "pixel CSV is empty");
  const auto header = split_fields(line);
  const bool has_sar = header.size() == 11;
  if (header.size() != 9 && !has_sar) {
    throw Error(ErrorKind::Parse, "pixel CSV header must have 9 or 11 columns");
  }
  if (header[0] != "pixel_id" || header[1] != "doy" || header[8] != "qa_valid") {
    throw Error(ErrorKind::Parse, "unexpected pixel CSV header: " + line);
  }

  struct Pending {
    std::vector<SpectralObservation> obs;
    std::vector<SarObservation> sar;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> pending;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::Parse, "wrong column count on line " + std::to_string(line_no));
    }
    std::string id(f[0]);
    auto [it, inserted] = pending.try_emplace(id);
    if (inserted) order.push_back(id);
    const int doy = static_cast<int>(parse_int(f[1]));
    if (!f[2].empty()) {
      SpectralObservation obs;
      obs.doy = doy;
      for (std::size_t b = 0; b < kNumBands; ++b) obs.bands[b] = parse_double(f[2 + b]);
      obs.qa_valid = parse_flag(f[8]);
      it->second.obs.push_back(obs);
    }
    if (has_sar && !f[9].empty()) {
      it->second.sar.push_back({doy, parse_double(f[9]), parse_double(f[10])});
    }
  }

  std::vector<ObservationSeries> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& p = pending[id];
    out.push_back(make_series(id, std::move(p.obs), std::move(p.sar)));
  }
  return out;
}

std::vector<ObservationSeries> read_pixel_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_pixel_csv(in);
}

void write_pixel_csv(std::ostream& out, std::span<const ObservationSeries> pixels) {
  bool any_sar = false;
  for (const auto& p : pixels) any_sar = any_sar || !p.sar.empty();
  out << "pixel_id,doy,blue,green,red,nir,swir1,swir2,qa_valid";
  if (any_sar) out << ",vv,vh";
  out << '\n';
  for (const auto& p : pixels) {
    // Merge optical and SAR rows by date.
    std::map<int, std::pair<const SpectralObservation*, const SarObservation*>> rows;
    for (const auto& o : p.observations) rows[o.doy].first = &o;
    for (const auto& s : p.sar) rows[s.doy].second = &s;
    for (const auto& [doy, row] : rows) {
      out << p.pixel_id << ',' << doy;
      if (row.first) {
        for (double v : row.first->bands) out << ',' << format_double(v);
        out << ',' << (row.first->qa_valid ? 1 : 0);
      } else {
        out << ",,,,,,,";
      }
      if (any_sar) {
        if (row.second) {
          out << ',' << format_double(row.second->vv_db) << ','
              << format_double(row.second->vh_db);
        } else {
          out << ",,";
        }
      }
      out << '\n';
    }
  }
}

std::vector<PixelLabel> read_labels_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "label CSV is empty");
  const auto header = split_fields(line);
  if (header.size() != 2 || header[0] != "pixel_id") {
    throw Error(ErrorKind::Parse, "label CSV header must be pixel_id,label");
  }
  std::vector<PixelLabel> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 2) throw Error(ErrorKind::Parse, "bad label row: " + line);
    const auto label = parse_class(f[1]);
    if (!label) throw Error(ErrorKind::Parse, "unknown class: " + std::string(f[1]));
    out.push_back({std::string(f[0]), *label});
  }
  return out;
}

std::vector<PixelLabel> read_labels_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_labels_csv(in);
}

void write_labels_csv(std::ostream& out, std::span<const PixelLabel> labels) {
  out << "pixel_id,label\n";
  for (const auto& l : labels) out << l.pixel_id << ',' << class_name(l.label) << '\n';
}

void write_regular_csv(std::ostream& out, std::span<const RegularSeries> series) {
  out << "pixel_id,step,doy";
  if (!series.empty()) {
    for (const auto& name : series.front().channel_names) out << ',' << name;
  }
  out << '\n';
  for (const auto& s : series) {
    if (s.channel_names != series.front().channel_names) {
      throw Error(ErrorKind::ShapeMismatch, "mixed channel sets in one series file");
    }
    for (std::size_t t = 0; t < s.steps(); ++t) {
      out << s.pixel_id << ',' << t << ',' << s.doys[t];
      for (std::size_t c = 0; c < s.channels(); ++c) out << ',' << format_double(s.at(t, c));
      out << '\n';
    }
  }
}

std::vector<RegularSeries> read_regular_csv(std::istream& in, Method method) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "series CSV is empty");
  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "pixel_id" || header[1] != "step" ||
      header[2] != "doy") {
    throw Error(ErrorKind::Parse, "series CSV header must start pixel_id,step,doy");
  }
  std::vector<std::string> channels(header.begin() + 3, header.end());
  std::vector<RegularSeries> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) throw Error(ErrorKind::Parse, "bad series row: " + line);
    if (out.empty() || out.back().pixel_id != f[0]) {
      RegularSeries s;
      s.pixel_id = std::string(f[0]);
      s.method = method;
      s.channel_names = channels;
      out.push_back(std::move(s));
    }
    auto& s = out.back();
    if (static_cast<std::size_t>(parse_int(f[1])) != s.steps()) {
      throw Error(ErrorKind::Parse, "steps out of order for " + s.pixel_id);
    }
    s.doys.push_back(static_cast<int>(parse_int(f[2])));
    for (std::size_t c = 3; c < f.size(); ++c) s.values.push_back(parse_double(f[c]));
  }
  for (const auto& s : out) s.validate();
  return out;
}

}  // namespace cropflow::io
