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

#include "cropflow/separability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cropflow/error.hpp"
#include "cropflow/io.hpp"
#include "cropflow/rng.hpp"

namespace cropflow {

double dtw_distance(std::span<const double> a, std::span<const double> b,
                    const DtwConfig& cfg) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptySequence, "DTW of an empty sequence");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t gap = n > m ? n - m : m - n;
  const std::size_t radius = cfg.window ? std::max(*cfg.window, gap) : std::max(n, m);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Rolling rows over j; prev = row i-1, cur = row i.
  std::vector<double> prev(m, kInf), cur(m, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    const std::size_t lo = i > radius ? i - radius : 0;
    const std::size_t hi = std::min(m - 1, i + radius);
    for (std::size_t j = lo; j <= hi; ++j) {
      const double cost = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, cur[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      cur[j] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

double mean_pairwise_dtw(std::span<const std::vector<double>> a,
                         std::span<const std::vector<double>> b, const DtwConfig& cfg,
                         Exec exec) {
  struct Pair {
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  if (b.empty()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) pairs.push_back({i, j});
    }
  } else {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) pairs.push_back({i, j});
    }
  }
  if (pairs.empty()) throw Error(ErrorKind::TooFewSamples, "no pairs to compare");
  const auto& rhs = b.empty() ? a : b;
  std::vector<double> dist(pairs.size());
  for_each_index(pairs.size(), exec, [&](std::size_t k) {
    dist[k] = dtw_distance(a[pairs[k].i], rhs[pairs[k].j], cfg);
  });
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / static_cast<double>(dist.size());
}

namespace {

std::vector<const RegularSeries*> select_samples(std::span<const RegularSeries> pool,
                                                 std::size_t max_count, std::uint64_t seed) {
  std::vector<const RegularSeries*> sorted;
  for (const auto& s : pool) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* x, const auto* y) { return x->pixel_id < y->pixel_id; });
  if (sorted.size() <= max_count) return sorted;
  Rng rng(seed);
  for (std::size_t i = 0; i < max_count; ++i) {
    std::swap(sorted[i], sorted[i + rng.uniform_index(sorted.size() - i)]);
  }
  sorted.resize(max_count);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* x, const auto* y) { return x->pixel_id < y->pixel_id; });
  return sorted;
}

std::vector<std::vector<double>> channel_of(const std::vector<const RegularSeries*>& set,
                                            const std::string& name) {
  std::vector<std::vector<double>> out;
  out.reserve(set.size());
  for (const auto* s : set) {
    const auto c = s->channel_index(name);
    if (!c) throw Error(ErrorKind::MissingBand, "series " + s->pixel_id + " lacks " + name);
    out.push_back(s->channel(*c));
  }
  return out;
}

}  // namespace

SeparabilityReport separability_report(std::span<const RegularSeries> corn,
                                       std::span<const RegularSeries> soy,
                                       const DtwConfig& cfg, std::uint64_t seed,
                                       std::size_t max_per_class, Exec exec) {
  if (corn.size() < 2 || soy.size() < 2) {
    throw Error(ErrorKind::TooFewSamples, "separability needs at least 2 samples per class");
  }
  const auto corn_sel = select_samples(corn, max_per_class, mix_seed(seed, 0));
  const auto soy_sel = select_samples(soy, max_per_class, mix_seed(seed, 1));

  SeparabilityReport report;
  report.method = std::string(method_name(corn.front().method));
  for (const auto& name : corn.front().channel_names) {
    const auto c = channel_of(corn_sel, name);
    const auto s = channel_of(soy_sel, name);
    BandSeparability band;
    band.band = name;
    band.intra_corn = mean_pairwise_dtw(c, {}, cfg, exec);
    band.intra_soy = mean_pairwise_dtw(s, {}, cfg, exec);
    band.inter = mean_pairwise_dtw(c, s, cfg, exec);
    band.separable = band.inter > band.intra_corn && band.inter > band.intra_soy;
    if (band.separable) ++report.separable_band_count;
    report.bands.push_back(band);
  }
  return report;
}

void write_separability_csv(std::ostream& out, std::span<const SeparabilityReport> reports) {
  out << "method,band,intra_corn,intra_soy,inter,separable_count\n";
  for (const auto& r : reports) {
    for (const auto& b : r.bands) {
      out << r.method << ',' << b.band << ',' << io::format_double(b.intra_corn) << ','
          << io::format_double(b.intra_soy) << ',' << io::format_double(b.inter) << ','
          << r.separable_band_count << '\n';
    }
  }
}

}  // namespace cropflow
