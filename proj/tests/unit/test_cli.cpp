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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "builders.hpp"
#include "cropflow/artifact.hpp"
#include "cropflow/cli.hpp"
#include "cropflow/io.hpp"
#include "cropflow/labels.hpp"

namespace cropflow {
namespace {

namespace fs = std::filesystem;
using testing::obs;

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "cropflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) { return io::read_text_file(p); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cropflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // A small synthetic source domain in <dir>/<name>/.
  std::string synth(const std::string& name, int per_class, int seed, double shift = 0.0) {
    const auto r = run({"synth-gen", "--out", path(name), "--n-per-class", std::to_string(per_class),
                        "--seed", std::to_string(seed), "--shift-days", std::to_string(shift)});
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  fs::path dir_;
};

TEST_F(Cli, HelpDocumentsExitCodes) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  const std::string text = r.out + r.err;
  EXPECT_NE(text.find("2"), std::string::npos);
  EXPECT_NE(text.find("exit"), std::string::npos);
  EXPECT_NE(text.find("synth-gen"), std::string::npos);
}

TEST_F(Cli, SynthGenIsRerunnable) {
  const auto a = synth("a", 5, 3);
  const auto b = synth("b", 5, 3);
  for (const char* f : {"pixels.csv", "labels.csv", "profile.json"}) {
    EXPECT_EQ(slurp(fs::path(a) / f), slurp(fs::path(b) / f)) << f;
  }
  const auto r = run({"synth-gen", "--out", path("c"), "--n-per-class", "5", "--seed", "3"});
  EXPECT_NE(r.out.find("seed: 3"), std::string::npos);
  EXPECT_NE(r.out.find("\"seed\": 3"), std::string::npos);  // resolved config
}

TEST_F(Cli, PreprocessTwoObservationPixelGivesWeeklySeries) {
  const auto px = make_series("7_9", {obs(120, 0.2), obs(200, 0.4)});
  {
    std::ofstream f(path("px.csv"));
    io::write_pixel_csv(f, std::span(&px, 1));
  }
  const auto r = run({"preprocess", "--input", path("px.csv"), "--method", "ln7", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("o/series.csv"));
  const auto series = io::read_regular_csv(in, Method::LN7);
  ASSERT_EQ(series.size(), 1u);
  EXPECT_EQ(series[0].steps(), 23u);
  EXPECT_TRUE(fs::exists(path("o/preprocess.json")));
}

TEST_F(Cli, TrainTwiceGivesIdenticalReport) {
  const auto src = synth("src", 10, 4);
  const std::string pixels_before = slurp(fs::path(src) / "pixels.csv");
  const auto train = [&](const std::string& out, const std::string& jobs) {
    return run({"train", "--input", src + "/pixels.csv", "--labels", src + "/labels.csv",
                "--model", "transformer", "--profile", "desk", "--seed", "1", "--epochs", "1",
                "--jobs", jobs, "--out", path(out)});
  };
  const auto a = train("t1", "1");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = train("t2", "3");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(path("t1/report.json")), slurp(path("t2/report.json")));
  EXPECT_EQ(slurp(path("t1/report.csv")), slurp(path("t2/report.csv")));
  EXPECT_EQ(slurp(path("t1/model.cfm")), slurp(path("t2/model.cfm")));
  EXPECT_TRUE(fs::exists(path("t1/timings.json")));
  EXPECT_EQ(slurp(fs::path(src) / "pixels.csv"), pixels_before);  // inputs untouched

  // predict on the same pixels
  const auto p = run({"predict", "--artifact", path("t1/model.cfm"), "--input",
                      src + "/pixels.csv", "--out", path("pred")});
  ASSERT_EQ(p.code, 0) << p.err;
  const std::string pred = slurp(path("pred/predictions.csv"));
  EXPECT_EQ(pred.substr(0, pred.find('\n')), "pixel_id,predicted_class,confidence");
  EXPECT_EQ(std::count(pred.begin(), pred.end(), '\n'), 31);
  const std::string pgm = slurp(path("pred/class_map.pgm"));
  EXPECT_EQ(pgm.substr(0, 2), "P2");

  // merge the two runs
  const auto rep = run({"report", "--reports", path("t1/report.json"), path("t2/report.json"),
                        "--timings", path("t1/timings.json"), "--out", path("rep")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(fs::exists(path("rep/summary.csv")));
  EXPECT_TRUE(fs::exists(path("rep/timings.csv")));
}

TEST_F(Cli, DannIgnoresTargetLabels) {
  const auto src = synth("src", 12, 5);
  const auto tgt = synth("tgt", 12, 6, 14.0);
  // Poisoned copy: every target label flipped to another class.
  std::ifstream lin(tgt + "/labels.csv");
  auto labels = io::read_labels_csv(lin);
  for (auto& l : labels) l.label = l.label == ClassLabel::Corn ? ClassLabel::Other : ClassLabel::Corn;
  {
    std::ofstream f(path("poisoned.csv"));
    io::write_labels_csv(f, labels);
  }
  const auto dann = [&](const std::string& lbl, const std::string& out) {
    return run({"transfer", "--method", "dann", "--input", src + "/pixels.csv", "--labels",
                src + "/labels.csv", "--target-pixels", tgt + "/pixels.csv", "--target-labels",
                lbl, "--model", "gru", "--epochs", "2", "--seed", "2", "--out", path(out)});
  };
  const auto a = dann(tgt + "/labels.csv", "clean");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = dann(path("poisoned.csv"), "poisoned");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(path("clean/model.cfm")), slurp(path("poisoned/model.cfm")));
}

TEST_F(Cli, TransferDirectAndFinetuneAreDeterministic) {
  const auto src = synth("src", 12, 7);
  const auto tgt = synth("tgt", 12, 8, 7.0);
  ASSERT_EQ(run({"train", "--input", src + "/pixels.csv", "--labels", src + "/labels.csv",
                 "--model", "gru", "--epochs", "1", "--folds", "3", "--out", path("m")})
                .code,
            0);
  for (const char* method : {"direct", "finetune:R3"}) {
    const auto go = [&](const std::string& out) {
      return run({"transfer", "--method", method, "--artifact", path("m/model.cfm"),
                  "--target-pixels", tgt + "/pixels.csv", "--target-labels", tgt + "/labels.csv",
                  "--epochs", "2", "--out", path(out)});
    };
    const auto a = go(std::string("a_") + method[0]);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(go(std::string("b_") + method[0]).code, 0);
    EXPECT_EQ(slurp(path(std::string("a_") + method[0] + "/report.json")),
              slurp(path(std::string("b_") + method[0] + "/report.json")));
  }
}

TEST_F(Cli, LabelsAndDtwReports) {
  ASSERT_EQ(run({"synth-gen", "--out", path("s"), "--n-per-class", "8", "--histories", "300"}).code, 0);
  const auto l = run({"labels", "--histories", path("s/histories.csv"), "--out", path("l")});
  ASSERT_EQ(l.code, 0) << l.err;
  EXPECT_TRUE(fs::exists(path("l/labels.csv")));
  const auto ratio = nlohmann::json::parse(slurp(path("l/trusted_ratio.json")));
  EXPECT_TRUE(ratio.is_object());

  const auto d = run({"dtw-report", "--input", path("s/pixels.csv"), "--labels",
                      path("s/labels.csv"), "--method", "ln7", "--out", path("d")});
  ASSERT_EQ(d.code, 0) << d.err;
  const std::string csv = slurp(path("d/separability.csv"));
  EXPECT_NE(csv.find("ln7"), std::string::npos);
}

TEST_F(Cli, ErrorsMapToDocumentedExitCodes) {
  {
    std::ofstream f(path("bad.json"));
    f << R"({"schema": "cropflow.pipeline/1", "no_such_key": 1})";
  }
  EXPECT_EQ(run({"train", "--config", path("bad.json"), "--out", path("x")}).code, 2);
  EXPECT_EQ(run({"train", "--model", "cnn", "--out", path("x")}).code, 2);
  EXPECT_EQ(run({"no-such-command"}).code, 2);
  const auto missing = run({"preprocess", "--input", path("missing.csv"), "--out", path("x")});
  EXPECT_EQ(missing.code, 3);
  EXPECT_NE(missing.err.find("error:"), std::string::npos);

  // direct transfer replays the artifact's preprocessing, so overriding it is refused
  const auto src = synth("src", 6, 9);
  ASSERT_EQ(run({"train", "--input", src + "/pixels.csv", "--labels", src + "/labels.csv",
                 "--folds", "3", "--out", path("m")})
                .code,
            0);
  EXPECT_EQ(run({"transfer", "--method", "direct", "--artifact", path("m/model.cfm"),
                 "--target-pixels", src + "/pixels.csv", "--target-labels", src + "/labels.csv",
                 "--series-method", "ln30", "--out", path("y")})
                .code,
            2);
  // a model saved for another grid does not accept these series
  const auto trained = load_artifact(path("m/model.cfm"));
  ModelArtifact other = trained;
  other.fingerprint.steps = 6;
  save_artifact(other, path("other.cfm"));
  const auto mismatch = run({"transfer", "--method", "direct", "--artifact", path("other.cfm"),
                             "--target-pixels", src + "/pixels.csv", "--target-labels",
                             src + "/labels.csv", "--out", path("z")});
  EXPECT_EQ(mismatch.code, 3);
  EXPECT_NE(mismatch.err.find("FingerprintMismatch"), std::string::npos) << mismatch.err;
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  {
    std::ofstream f(path("cfg.json"));
    f << R"({"schema": "cropflow.pipeline/1", "seed": 5, "synth": {"counts": [3, 3, 3]}})";
  }
  const auto r = run({"synth-gen", "--config", path("cfg.json"), "--seed", "9", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = nlohmann::json::parse(slurp(path("o/config.json")));
  EXPECT_EQ(cfg["seed"], 9);
  std::ifstream in(path("o/labels.csv"));
  EXPECT_EQ(io::read_labels_csv(in).size(), 9u);
}

}  // namespace
}  // namespace cropflow
