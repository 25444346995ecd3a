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

#include "cropflow/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cropflow/artifact.hpp"
#include "cropflow/dataset.hpp"
#include "cropflow/error.hpp"
#include "cropflow/eval.hpp"
#include "cropflow/io.hpp"
#include "cropflow/parallel.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/separability.hpp"

namespace cropflow::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!j.is_object()) config_error(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown key in " + std::string(where) + ": " + key);
    }
  }
}

template <typename T>
void read_opt(const json& j, std::string_view key, T& out) {
  const std::string k(key);
  if (j.contains(k)) out = j.at(k).get<T>();
}

std::string_view schedule_name(LambdaSchedule s) {
  return s == LambdaSchedule::Progressive ? "progressive" : "constant";
}

LambdaSchedule parse_schedule(const std::string& s) {
  if (s == "progressive") return LambdaSchedule::Progressive;
  if (s == "constant") return LambdaSchedule::Constant;
  config_error("unknown lambda schedule: " + s);
}

std::string_view mode_name(PatternMode m) {
  return m == PatternMode::AnchorRelative ? "anchor" : "strict";
}

PatternMode parse_mode(const std::string& s) {
  if (s == "anchor") return PatternMode::AnchorRelative;
  if (s == "strict") return PatternMode::StrictX;
  config_error("unknown label mode: " + s + " (anchor | strict)");
}

Method parse_method_or_throw(const std::string& s) {
  const auto m = parse_method(s);
  if (!m) config_error("unknown preprocessing method: " + s);
  return *m;
}

json rotation_to_json(const synth::RotationMix& m) {
  return {{"continuous_corn", m.continuous_corn},
          {"continuous_soy", m.continuous_soy},
          {"corn_soy", m.corn_soy},
          {"other_soy", m.other_soy},
          {"random", m.random}};
}

synth::RotationMix rotation_from_json(const json& j) {
  check_keys(j, {"continuous_corn", "continuous_soy", "corn_soy", "other_soy", "random"},
             "synth.rotation_mix");
  synth::RotationMix m;
  read_opt(j, "continuous_corn", m.continuous_corn);
  read_opt(j, "continuous_soy", m.continuous_soy);
  read_opt(j, "corn_soy", m.corn_soy);
  read_opt(j, "other_soy", m.other_soy);
  read_opt(j, "random", m.random);
  return m;
}

// Splits the target domain by a seeded permutation of pixel positions. Labels
// are never consulted, so the adaptation set is the same whatever the label
// file says.
std::vector<std::size_t> target_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng(mix_seed(seed, 77)).shuffle(idx);
  return idx;
}

}  // namespace

ModelConfig PipelineConfig::resolved_model() const {
  json m = model;
  if (!m.contains("seed")) m["seed"] = seed;
  return model_config_from_json(m, desk_profile);
}

json to_json(const PipelineConfig& c) {
  json methods = json::array();
  for (Method m : c.dtw.methods) methods.push_back(method_name(m));
  json model;
  to_json(model, c.resolved_model());
  return {
      {"schema", kPipelineSchema},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"output_dir", c.output_dir},
      {"inputs",
       {{"pixels", c.inputs.pixels},
        {"labels", c.inputs.labels},
        {"histories", c.inputs.histories},
        {"artifact", c.inputs.artifact},
        {"target_pixels", c.inputs.target_pixels},
        {"target_labels", c.inputs.target_labels},
        {"reports", c.inputs.reports},
        {"timings", c.inputs.timings}}},
      {"preprocess", preprocess_spec_to_json(c.preprocess)},
      {"profile", c.desk_profile ? "desk" : "full"},
      {"model", model},
      {"folds", c.folds},
      {"transfer",
       {{"method", c.transfer.method},
        {"finetune",
         {{"epochs", c.transfer.finetune.epochs},
          {"stage_epochs", c.transfer.finetune.stage_epochs},
          {"lr", c.transfer.finetune.lr},
          {"batch_size", c.transfer.finetune.batch_size}}},
        {"target_train", c.transfer.target_train},
        {"target_val", c.transfer.target_val},
        {"target_test", c.transfer.target_test},
        {"adapt", c.transfer.adapt},
        {"lambda_schedule", schedule_name(c.transfer.schedule)},
        {"lambda_scale", c.transfer.lambda_scale},
        {"domain_hidden", c.transfer.domain_hidden}}},
      {"synth",
       {{"profile_file", c.synth.profile_file},
        {"counts", c.synth.counts},
        {"shift", synth::shift_to_json(c.synth.shift)},
        {"histories", c.synth.histories},
        {"rotation_mix", rotation_to_json(c.synth.rotation_mix)}}},
      {"labels", {{"mode", mode_name(c.label_mode)}}},
      {"dtw",
       {{"window", c.dtw.window ? json(*c.dtw.window) : json(nullptr)},
        {"max_per_class", c.dtw.max_per_class},
        {"methods", methods}}},
  };
}

PipelineConfig pipeline_from_json(const json& j) {
  PipelineConfig c;
  try {
    check_keys(j,
               {"schema", "seed", "jobs", "output_dir", "inputs", "preprocess", "profile", "model",
                "folds", "transfer", "synth", "labels", "dtw"},
               "pipeline config");
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kPipelineSchema) {
      config_error("pipeline config needs \"schema\": \"" + std::string(kPipelineSchema) + "\"");
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "jobs", c.jobs);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "folds", c.folds);
    if (j.contains("inputs")) {
      const json& in = j.at("inputs");
      check_keys(in,
                 {"pixels", "labels", "histories", "artifact", "target_pixels", "target_labels",
                  "reports", "timings"},
                 "inputs");
      read_opt(in, "pixels", c.inputs.pixels);
      read_opt(in, "labels", c.inputs.labels);
      read_opt(in, "histories", c.inputs.histories);
      read_opt(in, "artifact", c.inputs.artifact);
      read_opt(in, "target_pixels", c.inputs.target_pixels);
      read_opt(in, "target_labels", c.inputs.target_labels);
      read_opt(in, "reports", c.inputs.reports);
      read_opt(in, "timings", c.inputs.timings);
    }
    if (j.contains("preprocess")) c.preprocess = preprocess_spec_from_json(j.at("preprocess"));
    if (j.contains("profile")) {
      const auto p = j.at("profile").get<std::string>();
      if (p != "desk" && p != "full") config_error("profile must be desk or full, got " + p);
      c.desk_profile = p == "desk";
    }
    if (j.contains("model")) {
      c.model = j.at("model");
      // Validates eagerly so a bad model block fails before any work starts.
      (void)c.resolved_model();
    }
    if (j.contains("transfer")) {
      const json& t = j.at("transfer");
      check_keys(t,
                 {"method", "finetune", "target_train", "target_val", "target_test", "adapt",
                  "lambda_schedule", "lambda_scale", "domain_hidden"},
                 "transfer");
      read_opt(t, "method", c.transfer.method);
      read_opt(t, "target_train", c.transfer.target_train);
      read_opt(t, "target_val", c.transfer.target_val);
      read_opt(t, "target_test", c.transfer.target_test);
      read_opt(t, "adapt", c.transfer.adapt);
      read_opt(t, "lambda_scale", c.transfer.lambda_scale);
      read_opt(t, "domain_hidden", c.transfer.domain_hidden);
      if (t.contains("lambda_schedule")) {
        c.transfer.schedule = parse_schedule(t.at("lambda_schedule").get<std::string>());
      }
      if (t.contains("finetune")) {
        const json& f = t.at("finetune");
        check_keys(f, {"epochs", "stage_epochs", "lr", "batch_size"}, "transfer.finetune");
        read_opt(f, "epochs", c.transfer.finetune.epochs);
        read_opt(f, "stage_epochs", c.transfer.finetune.stage_epochs);
        read_opt(f, "lr", c.transfer.finetune.lr);
        read_opt(f, "batch_size", c.transfer.finetune.batch_size);
      }
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      check_keys(s, {"profile_file", "counts", "shift", "histories", "rotation_mix"}, "synth");
      read_opt(s, "profile_file", c.synth.profile_file);
      read_opt(s, "counts", c.synth.counts);
      read_opt(s, "histories", c.synth.histories);
      if (s.contains("shift")) c.synth.shift = synth::shift_from_json(s.at("shift"));
      if (s.contains("rotation_mix")) c.synth.rotation_mix = rotation_from_json(s.at("rotation_mix"));
    }
    if (j.contains("labels")) {
      check_keys(j.at("labels"), {"mode"}, "labels");
      if (j.at("labels").contains("mode")) {
        c.label_mode = parse_mode(j.at("labels").at("mode").get<std::string>());
      }
    }
    if (j.contains("dtw")) {
      const json& d = j.at("dtw");
      check_keys(d, {"window", "max_per_class", "methods"}, "dtw");
      if (d.contains("window") && !d.at("window").is_null()) {
        c.dtw.window = d.at("window").get<std::size_t>();
      }
      read_opt(d, "max_per_class", c.dtw.max_per_class);
      if (d.contains("methods")) {
        c.dtw.methods.clear();
        for (const auto& m : d.at("methods")) {
          c.dtw.methods.push_back(parse_method_or_throw(m.get<std::string>()));
        }
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("pipeline config: ") + e.what());
  }
  return c;
}

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::string> input, labels, histories, artifact, target_pixels, target_labels;
  std::vector<std::string> reports, timings;
  std::optional<std::string> method, channels, model, profile, transfer_method, mode;
  std::optional<std::string> series_method;
  std::optional<std::size_t> folds, epochs, n_per_class, history_count, max_per_class;
  std::optional<std::size_t> dtw_window;
  std::optional<double> shift_days, amplitude_scale, cloud_probability, reflectance_noise;
};

// Applies flag overrides on top of the file config. `method` means the
// preprocessing method everywhere except `transfer`, where it selects the
// transfer workflow.
PipelineConfig resolve(const std::string& command, const Overrides& o) {
  PipelineConfig c;
  if (!o.config.empty()) {
    json j;
    try {
      j = json::parse(io::read_text_file(o.config));
    } catch (const json::exception& e) {
      config_error("cannot parse config " + o.config + ": " + e.what());
    }
    c = pipeline_from_json(j);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.output_dir = *o.out;
  if (o.input) c.inputs.pixels = *o.input;
  if (o.labels) c.inputs.labels = *o.labels;
  if (o.histories) c.inputs.histories = *o.histories;
  if (o.artifact) c.inputs.artifact = *o.artifact;
  if (o.target_pixels) c.inputs.target_pixels = *o.target_pixels;
  if (o.target_labels) c.inputs.target_labels = *o.target_labels;
  if (!o.reports.empty()) c.inputs.reports = o.reports;
  if (!o.timings.empty()) c.inputs.timings = o.timings;
  if (command == "transfer") {
    if (o.method) c.transfer.method = *o.method;
    // direct and fine-tuning replay the preprocessing stored in the artifact
    if (c.transfer.method != "dann" && (o.series_method || o.channels)) {
      config_error("--series-method and --channels only apply to dann; " + c.transfer.method +
                   " reuses the artifact's preprocessing");
    }
    if (o.series_method) c.preprocess.method = parse_method_or_throw(*o.series_method);
  } else if (command == "dtw-report") {
    if (o.method) c.dtw.methods = {parse_method_or_throw(*o.method)};
  } else if (o.method) {
    c.preprocess.method = parse_method_or_throw(*o.method);
  }
  if (o.channels) {
    const auto cs = parse_channel_set(*o.channels);
    if (!cs) config_error("unknown channel set: " + *o.channels);
    c.preprocess.channels = *cs;
  }
  if (o.profile) {
    if (*o.profile != "desk" && *o.profile != "full") {
      config_error("--profile must be desk or full");
    }
    c.desk_profile = *o.profile == "desk";
  }
  if (o.model) {
    // A different kind resets the model block; its other keys belonged to
    // the old architecture.
    const std::string old = c.model.value("kind", "");
    if (old != *o.model) c.model = json{{"kind", *o.model}};
  }
  if (o.epochs) {
    c.model["epochs"] = *o.epochs;
    c.transfer.finetune.epochs = *o.epochs;
    c.transfer.finetune.stage_epochs = (*o.epochs + 1) / 2;
  }
  if (o.folds) c.folds = *o.folds;
  if (o.mode) c.label_mode = parse_mode(*o.mode);
  if (o.n_per_class) c.synth.counts.fill(*o.n_per_class);
  if (o.history_count) c.synth.histories = *o.history_count;
  if (o.shift_days) c.synth.shift.phenology_shift_days = *o.shift_days;
  if (o.amplitude_scale) c.synth.shift.amplitude_scale = *o.amplitude_scale;
  if (o.cloud_probability) c.synth.shift.cloud_probability = *o.cloud_probability;
  if (o.reflectance_noise) c.synth.shift.extra_reflectance_noise = *o.reflectance_noise;
  if (o.max_per_class) c.dtw.max_per_class = *o.max_per_class;
  if (o.dtw_window) c.dtw.window = *o.dtw_window;

  (void)c.resolved_model();
  c.preprocess.smoother.validate();
  c.preprocess.window.validate();
  c.synth.shift.validate();
  c.synth.rotation_mix.validate();
  if (c.folds < 3) config_error("folds must be at least 3");
  return c;
}

void require_path(const std::string& path, std::string_view what) {
  if (path.empty()) config_error(std::string("missing input: ") + std::string(what));
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "no such file: " + path);
}

class Session {
 public:
  Session(std::string command, PipelineConfig cfg, std::ostream& out)
      : command_(std::move(command)), cfg_(std::move(cfg)), out_(out) {
    set_worker_threads(static_cast<int>(cfg_.jobs));
    std::error_code ec;
    fs::create_directories(cfg_.output_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + cfg_.output_dir + ": " + ec.message());
    const json resolved = to_json(cfg_);
    out_ << "command: " << command_ << "\nseed: " << cfg_.seed << "\nconfig: " << resolved.dump(2)
         << "\n";
    write("config.json", resolved.dump(2) + "\n");
  }

  const PipelineConfig& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }

  fs::path path(std::string_view name) const { return fs::path(cfg_.output_dir) / name; }

  void write(std::string_view name, std::string_view text) const {
    io::write_text_file(path(name), text);
  }

 private:
  std::string command_;
  PipelineConfig cfg_;
  std::ostream& out_;
};

// Fills the raw acquisition grid from the dataset when the method needs it,
// so the preprocessing spec stored with an artifact reproduces the same columns later.
PreprocessSpec resolve_spec(PreprocessSpec spec, std::span<const ObservationSeries> pixels) {
  if (spec.method == Method::Raw && spec.raw_grid.empty()) {
    spec.raw_grid = common_acquisition_grid(pixels, spec.window);
  }
  return spec;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_report(Session& s, const EvalReport& r, double extra_seconds) {
  s.write("report.json", report_json(r).dump(2) + "\n");
  s.write("report.csv", report_csv(r));
  json t = timings_json(r);
  t["total_seconds"] = extra_seconds;
  s.write("timings.json", t.dump(2) + "\n");
  s.out() << "overall accuracy (trimmed fold mean): " << io::format_double(r.aggregate_oa())
          << "\n";
}

int cmd_synth_gen(Session& s) {
  const auto& c = s.cfg();
  synth::Profile profile = synth::default_profile();
  if (!c.synth.profile_file.empty()) {
    require_path(c.synth.profile_file, "synth profile");
    profile = synth::profile_from_json(json::parse(io::read_text_file(c.synth.profile_file)));
  }
  const auto data = synth::generate(profile, c.synth.counts, c.synth.shift, c.seed);
  {
    std::ofstream f(s.path("pixels.csv"), std::ios::binary);
    io::write_pixel_csv(f, data.pixels);
  }
  {
    std::ofstream f(s.path("labels.csv"), std::ios::binary);
    io::write_labels_csv(f, data.labels);
  }
  if (c.synth.histories > 0) {
    const auto h = synth::generate_histories(c.synth.histories, c.synth.rotation_mix,
                                             mix_seed(c.seed, 5));
    std::ofstream f(s.path("histories.csv"), std::ios::binary);
    write_history_csv(f, h);
  }
  s.write("profile.json", synth::profile_to_json(profile).dump(2) + "\n");
  s.out() << "generated " << data.pixels.size() << " pixels\n";
  return 0;
}

int cmd_preprocess(Session& s) {
  const auto& c = s.cfg();
  require_path(c.inputs.pixels, "--input pixel CSV");
  const auto obs = io::read_pixel_csv(fs::path(c.inputs.pixels));
  const PreprocessSpec spec = resolve_spec(c.preprocess, obs);
  const auto series = preprocess_all(obs, spec);
  std::ofstream f(s.path("series.csv"), std::ios::binary);
  io::write_regular_csv(f, series);
  s.write("preprocess.json", preprocess_spec_to_json(spec).dump(2) + "\n");
  s.out() << "wrote " << series.size() << " series ("
          << (series.empty() ? 0 : series.front().steps()) << " steps)\n";
  return 0;
}

int cmd_labels(Session& s) {
  const auto& c = s.cfg();
  require_path(c.inputs.histories, "--histories CSV");
  const auto histories = read_history_csv(fs::path(c.inputs.histories));
  const auto set = build_trusted_labels(histories, c.label_mode, c.seed);
  {
    std::ofstream f(s.path("labels.csv"), std::ios::binary);
    io::write_labels_csv(f, set.labels);
  }
  const auto& k = set.ratio.counts;
  const json report = {{"p_trusted", set.ratio.p_trusted},
                       {"trusted_corn", k.trusted_corn},
                       {"trusted_soybean", k.trusted_soy},
                       {"cdl_corn", k.cdl_corn},
                       {"cdl_soybean", k.cdl_soy},
                       {"cdl_other", k.cdl_other},
                       {"other_kept", set.labels.size() - k.trusted_corn - k.trusted_soy}};
  s.write("trusted_ratio.json", report.dump(2) + "\n");
  s.out() << "p_trusted " << io::format_double(set.ratio.p_trusted) << ", " << set.labels.size()
          << " labels\n";
  return 0;
}

int cmd_dtw_report(Session& s) {
  const auto& c = s.cfg();
  require_path(c.inputs.pixels, "--input pixel CSV");
  require_path(c.inputs.labels, "--labels CSV");
  const auto obs = io::read_pixel_csv(fs::path(c.inputs.pixels));
  const auto lab = io::read_labels_csv(fs::path(c.inputs.labels));
  std::vector<SeparabilityReport> reports;
  for (Method m : c.dtw.methods) {
    PreprocessSpec spec = c.preprocess;
    spec.method = m;
    const auto data = join_labels(preprocess_all(obs, resolve_spec(spec, obs)), lab);
    std::vector<RegularSeries> corn, soy;
    for (const auto& it : data.items) {
      if (it.label == ClassLabel::Corn) corn.push_back(it.series);
      if (it.label == ClassLabel::Soybean) soy.push_back(it.series);
    }
    reports.push_back(separability_report(corn, soy, DtwConfig{c.dtw.window}, c.seed,
                                          c.dtw.max_per_class));
    s.out() << method_name(m) << ": " << reports.back().separable_band_count
            << " separable bands\n";
  }
  std::ofstream f(s.path("separability.csv"), std::ios::binary);
  write_separability_csv(f, reports);
  return 0;
}

int cmd_train(Session& s) {
  const auto& c = s.cfg();
  require_path(c.inputs.pixels, "--input pixel CSV");
  require_path(c.inputs.labels, "--labels CSV");
  const auto t0 = std::chrono::steady_clock::now();
  const auto obs = io::read_pixel_csv(fs::path(c.inputs.pixels));
  const PreprocessSpec spec = resolve_spec(c.preprocess, obs);
  const auto data =
      join_labels(preprocess_all(obs, spec), io::read_labels_csv(fs::path(c.inputs.labels)));
  const ModelConfig mc = c.resolved_model();
  const EvalReport report = cross_validate(mc, data, c.folds, c.seed);

  // The saved model is trained on all folds but the first, which serves as
  // validation, so it sees the same amount of data as each CV model.
  const auto folds = kfold_split(data.labels(data.all_indices()), c.folds, c.seed);
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == 0 ? va : tr).push_back(i);
  ModelArtifact a = train_artifact(mc, data, tr, va);
  a.notes["preprocess"] = preprocess_spec_to_json(spec);
  save_artifact(a, s.path("model.cfm"));
  write_report(s, report, seconds_since(t0));
  return 0;
}

struct TargetData {
  std::vector<RegularSeries> series;
  std::map<std::string, ClassLabel> labels;
};

TargetData load_target(const PipelineConfig& c, const PreprocessSpec& spec, bool need_labels) {
  require_path(c.inputs.target_pixels, "--target-pixels CSV");
  TargetData t;
  t.series = preprocess_all(io::read_pixel_csv(fs::path(c.inputs.target_pixels)), spec);
  if (need_labels || !c.inputs.target_labels.empty()) {
    require_path(c.inputs.target_labels, "--target-labels CSV");
    for (const auto& l : io::read_labels_csv(fs::path(c.inputs.target_labels))) {
      t.labels[l.pixel_id] = l.label;
    }
  }
  return t;
}

// Labeled target samples in permutation order.
LabeledDataset labeled_in_order(const TargetData& t, std::span<const std::size_t> order) {
  LabeledDataset d;
  for (std::size_t i : order) {
    const auto it = t.labels.find(t.series[i].pixel_id);
    if (it == t.labels.end()) continue;
    d.items.push_back({t.series[i], it->second, Split::Test, "target"});
  }
  return d;
}

SampleMatrix take(const LabeledDataset& d, std::size_t from, std::size_t count) {
  std::vector<std::size_t> idx;
  for (std::size_t i = from; i < std::min(d.size(), from + count); ++i) idx.push_back(i);
  return to_matrix(d, idx);
}

EvalReport single_fold_report(const ModelArtifact& a, const SampleMatrix& test,
                              std::uint64_t seed) {
  EvalReport r;
  r.model = std::string(model_kind_name(a.config.kind));
  r.fingerprint = a.fingerprint;
  r.seed = seed;
  r.folds.push_back(evaluate(a, test));
  return r;
}

int cmd_transfer(Session& s) {
  const auto& c = s.cfg();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& method = c.transfer.method;

  if (method == "dann") {
    require_path(c.inputs.pixels, "--input source pixel CSV");
    require_path(c.inputs.labels, "--labels source CSV");
    const auto obs = io::read_pixel_csv(fs::path(c.inputs.pixels));
    const PreprocessSpec spec = resolve_spec(c.preprocess, obs);
    const auto source =
        join_labels(preprocess_all(obs, spec), io::read_labels_csv(fs::path(c.inputs.labels)));
    const auto folds = kfold_split(source.labels(source.all_indices()), 10, c.seed);
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == 0 ? va : tr).push_back(i);

    const TargetData target = load_target(c, spec, false);
    const auto order = target_order(target.series.size(), c.seed);
    std::size_t n_adapt = c.transfer.adapt;
    if (n_adapt + c.transfer.target_test > order.size()) n_adapt = order.size() / 2;
    std::vector<RegularSeries> adapt;
    for (std::size_t i = 0; i < n_adapt; ++i) adapt.push_back(target.series[order[i]]);

    DannConfig dc;
    dc.model = c.resolved_model();
    dc.domain_hidden = c.transfer.domain_hidden;
    dc.schedule = c.transfer.schedule;
    dc.lambda_scale = c.transfer.lambda_scale;
    DannResult res = dann_train(source.fingerprint(), to_matrix(source, tr), to_matrix(source, va),
                                UnlabeledSet::from(adapt), dc);
    res.artifact.notes["preprocess"] = preprocess_spec_to_json(spec);
    save_artifact(res.artifact, s.path("model.cfm"));
    s.out() << "domain accuracy " << io::format_double(res.domain_accuracy) << "\n";

    if (!target.labels.empty()) {
      const auto rest = std::span(order).subspan(n_adapt);
      const auto test = labeled_in_order(target, rest);
      write_report(s, single_fold_report(res.artifact, take(test, 0, c.transfer.target_test), c.seed),
                   seconds_since(t0));
    }
    return 0;
  }

  require_path(c.inputs.artifact, "--artifact");
  const ModelArtifact pre = load_artifact(c.inputs.artifact);
  if (!pre.notes.contains("preprocess")) {
    throw Error(ErrorKind::Parse, "artifact lacks its preprocessing record");
  }
  const PreprocessSpec spec = preprocess_spec_from_json(pre.notes.at("preprocess"));
  const TargetData target = load_target(c, spec, true);
  if (!target.series.empty()) {
    require_fingerprint(pre.fingerprint, fingerprint_of(target.series.front()), "target pixels");
  }
  const auto order = target_order(target.series.size(), c.seed);
  const auto labeled = labeled_in_order(target, order);

  if (method == "direct") {
    const EvalReport r = direct_transfer_eval(pre, labeled);
    write_report(s, r, seconds_since(t0));
    return 0;
  }
  if (method.rfind("finetune:", 0) == 0) {
    const auto strategy = parse_strategy(method.substr(9));
    if (!strategy) config_error("unknown fine-tuning strategy in " + method);
    // Presets shrink proportionally when the target holds fewer samples.
    std::size_t ntr = c.transfer.target_train, nva = c.transfer.target_val,
                nte = c.transfer.target_test;
    const std::size_t want = ntr + nva + nte;
    if (want > labeled.size()) {
      ntr = labeled.size() * ntr / want;
      nva = labeled.size() * nva / want;
      nte = labeled.size() - ntr - nva;
    }
    FinetuneConfig fc = c.transfer.finetune;
    fc.strategy = *strategy;
    fc.seed = c.seed;
    FinetuneResult res =
        fine_tune(pre, take(labeled, 0, ntr), take(labeled, ntr, nva), fc);
    save_artifact(res.artifact, s.path("model.cfm"));
    write_report(s, single_fold_report(res.artifact, take(labeled, ntr + nva, nte), c.seed),
                 seconds_since(t0));
    return 0;
  }
  config_error("unknown transfer method: " + method + " (direct | finetune:R1..R4 | dann)");
}

// Pixel ids of the form "<row>_<col>" give raster coordinates.
std::optional<std::pair<long long, long long>> raster_position(const std::string& id) {
  const auto us = id.find('_');
  if (us == std::string::npos || us == 0 || us + 1 == id.size()) return std::nullopt;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (i != us && (id[i] < '0' || id[i] > '9')) return std::nullopt;
  }
  return std::pair{std::stoll(id.substr(0, us)), std::stoll(id.substr(us + 1))};
}

int cmd_predict(Session& s) {
  const auto& c = s.cfg();
  require_path(c.inputs.artifact, "--artifact");
  require_path(c.inputs.pixels, "--input pixel CSV");
  const ModelArtifact a = load_artifact(c.inputs.artifact);
  if (!a.notes.contains("preprocess")) {
    throw Error(ErrorKind::Parse, "artifact lacks its preprocessing record");
  }
  const PreprocessSpec spec = preprocess_spec_from_json(a.notes.at("preprocess"));
  const auto series = preprocess_all(io::read_pixel_csv(fs::path(c.inputs.pixels)), spec);
  if (!series.empty()) {
    require_fingerprint(a.fingerprint, fingerprint_of(series.front()), "input pixels");
  }
  const auto proba = artifact_proba(a, to_matrix(series));

  std::string csv = "pixel_id,predicted_class,confidence\n";
  std::vector<int> pred(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& p = proba[i];
    pred[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    csv += series[i].pixel_id + "," + std::string(class_name(kAllClasses[pred[i]])) + "," +
           io::format_double(p[pred[i]]) + "\n";
  }
  s.write("predictions.csv", csv);

  std::vector<std::pair<long long, long long>> pos;
  for (const auto& r : series) {
    const auto p = raster_position(r.pixel_id);
    if (!p) break;
    pos.push_back(*p);
  }
  if (!series.empty() && pos.size() == series.size()) {
    long long h = 0, w = 0;
    for (const auto& [r, col] : pos) {
      h = std::max(h, r + 1);
      w = std::max(w, col + 1);
    }
    // 0 marks pixels without a prediction; classes are 1..3.
    std::vector<int> raster(static_cast<std::size_t>(h * w), 0);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      raster[static_cast<std::size_t>(pos[i].first * w + pos[i].second)] = pred[i] + 1;
    }
    std::ostringstream pgm;
    pgm << "P2\n" << w << ' ' << h << "\n3\n";
    for (long long r = 0; r < h; ++r) {
      for (long long col = 0; col < w; ++col) {
        pgm << raster[static_cast<std::size_t>(r * w + col)] << (col + 1 == w ? '\n' : ' ');
      }
    }
    s.write("class_map.pgm", pgm.str());
  }
  s.out() << "predicted " << series.size() << " pixels\n";
  return 0;
}

int cmd_report(Session& s) {
  const auto& c = s.cfg();
  if (c.inputs.reports.empty()) config_error("report needs at least one --reports file");
  std::string summary =
      "source,model,method,folds,overall_accuracy,corn_accuracy,soybean_accuracy,"
      "other_accuracy\n";
  for (const auto& path : c.inputs.reports) {
    require_path(path, "report");
    const EvalReport r = report_from_json(json::parse(io::read_text_file(path)));
    const auto ca = r.aggregate_class_accuracy();
    summary += fs::path(path).generic_string() + "," + r.model + "," + r.fingerprint.method +
               "," + std::to_string(r.folds.size()) + "," + io::format_double(r.aggregate_oa());
    for (double v : ca) summary += "," + io::format_double(v);
    summary += "\n";
  }
  s.write("summary.csv", summary);

  if (!c.inputs.timings.empty()) {
    std::string table = "source,model,fold,train_seconds,predict_seconds\n";
    for (const auto& path : c.inputs.timings) {
      require_path(path, "timings");
      const json t = json::parse(io::read_text_file(path));
      double tr = 0.0, pr = 0.0;
      std::size_t n = 0;
      for (const auto& f : t.at("folds")) {
        const double a = f.at("train_seconds").get<double>();
        const double b = f.at("predict_seconds").get<double>();
        table += path + "," + t.at("model").get<std::string>() + "," +
                 std::to_string(f.at("fold").get<std::size_t>()) + "," + io::format_double(a) +
                 "," + io::format_double(b) + "\n";
        tr += a;
        pr += b;
        ++n;
      }
      if (n > 0) {
        table += path + "," + t.at("model").get<std::string>() + ",mean," +
                 io::format_double(tr / static_cast<double>(n)) + "," +
                 io::format_double(pr / static_cast<double>(n)) + "\n";
      }
    }
    s.write("timings.csv", table);
  }
  s.out() << "merged " << c.inputs.reports.size() << " reports\n";
  return 0;
}

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  configuration error (schema violation, unknown key, bad flag value)\n"
    "  3  data error (missing or malformed file, fingerprint mismatch, too few samples)\n"
    "  4  numeric divergence (non-finite loss, singular system)\n";

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cropflow: pixel-wise crop-type classification from satellite time series"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  Overrides o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "pipeline config JSON (cropflow.pipeline/1)");
    sub->add_option("--seed", o.seed, "global seed");
    sub->add_option("--jobs", o.jobs, "worker threads; results do not depend on it");
    sub->add_option("--out", o.out, "output directory");
    sub->footer(kExitCodes);
  };
  const auto preprocess_flags = [&](CLI::App* sub) {
    sub->add_option("--method", o.method, "raw | we | ln7 | ln30 | ln7we | peak");
    sub->add_option("--channels", o.channels, "optical | optical+vi | optical+sar | optical+vi+sar");
  };

  auto* synth_gen = app.add_subcommand("synth-gen", "emit a synthetic pixel/label dataset");
  common(synth_gen);
  synth_gen->add_option("--n-per-class", o.n_per_class, "pixels per class");
  synth_gen->add_option("--histories", o.history_count, "also emit this many crop histories");
  synth_gen->add_option("--shift-days", o.shift_days, "phenology shift in days");
  synth_gen->add_option("--amplitude-scale", o.amplitude_scale, "greenness amplitude factor");
  synth_gen->add_option("--cloud-probability", o.cloud_probability, "per-observation cloud rate");
  synth_gen->add_option("--reflectance-noise", o.reflectance_noise, "extra reflectance noise sd");

  auto* preprocess = app.add_subcommand("preprocess", "pixel CSV to regular series CSV");
  common(preprocess);
  preprocess_flags(preprocess);
  preprocess->add_option("--input", o.input, "pixel CSV");

  auto* labels = app.add_subcommand("labels", "crop histories to trusted labels");
  common(labels);
  labels->add_option("--histories", o.histories, "history CSV");
  labels->add_option("--mode", o.mode, "anchor | strict");

  auto* dtw = app.add_subcommand("dtw-report", "DTW separability of corn and soybean per band");
  common(dtw);
  dtw->add_option("--input", o.input, "pixel CSV");
  dtw->add_option("--labels", o.labels, "label CSV");
  dtw->add_option("--method", o.method, "single method (default: all six)");
  dtw->add_option("--channels", o.channels, "channel set");
  dtw->add_option("--max-per-class", o.max_per_class, "samples per class");
  dtw->add_option("--window", o.dtw_window, "Sakoe-Chiba radius");

  auto* train = app.add_subcommand("train", "k-fold evaluation plus a saved model");
  common(train);
  preprocess_flags(train);
  train->add_option("--input", o.input, "pixel CSV");
  train->add_option("--labels", o.labels, "label CSV");
  train->add_option("--model", o.model, "rf | rnn | lstm | gru | bi* | atbi* | transformer");
  train->add_option("--profile", o.profile, "desk | full");
  train->add_option("--folds", o.folds, "number of folds");
  train->add_option("--epochs", o.epochs, "training epochs");

  auto* transfer = app.add_subcommand("transfer", "apply a model to a shifted target domain");
  common(transfer);
  transfer->add_option("--method", o.method, "direct | finetune:R1..R4 | dann");
  transfer->add_option("--artifact", o.artifact, "pretrained model (direct, finetune)");
  transfer->add_option("--input", o.input, "source pixel CSV (dann)");
  transfer->add_option("--labels", o.labels, "source label CSV (dann)");
  transfer->add_option("--target-pixels", o.target_pixels, "target pixel CSV");
  transfer->add_option("--target-labels", o.target_labels, "target label CSV (evaluation)");
  transfer->add_option("--series-method", o.series_method, "preprocessing method (dann only; others reuse the artifact's)");
  transfer->add_option("--channels", o.channels, "channel set (dann)");
  transfer->add_option("--model", o.model, "model kind (dann)");
  transfer->add_option("--profile", o.profile, "desk | full");
  transfer->add_option("--epochs", o.epochs, "training epochs");

  auto* predict = app.add_subcommand("predict", "classify pixels with a saved model");
  common(predict);
  predict->add_option("--artifact", o.artifact, "model file");
  predict->add_option("--input", o.input, "pixel CSV");

  auto* report = app.add_subcommand("report", "merge evaluation reports and timing tables");
  common(report);
  report->add_option("--reports", o.reports, "report.json files");
  report->add_option("--timings", o.timings, "timings.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    Session s(name, resolve(name, o), out);
    if (name == "synth-gen") return cmd_synth_gen(s);
    if (name == "preprocess") return cmd_preprocess(s);
    if (name == "labels") return cmd_labels(s);
    if (name == "dtw-report") return cmd_dtw_report(s);
    if (name == "train") return cmd_train(s);
    if (name == "transfer") return cmd_transfer(s);
    if (name == "predict") return cmd_predict(s);
    return cmd_report(s);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    err << "error (Parse): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cropflow::cli
