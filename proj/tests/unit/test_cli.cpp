// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using voxbayes::testing::TempDir;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = voxbayes::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

}  // namespace

TEST_CASE("synth writes the requested dataset") {
  TempDir dir("cli_synth");
  const auto o = run({"synth", "--n", "200", "--shape", "32x32x16", "--seed", "7", "--out", (dir.path() / "s").string()});
  CHECK(o.code == 0);
  std::size_t volumes = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "s" / "volumes")) volumes += e.path().extension() == ".nii";
  CHECK(volumes == 200);
  CHECK(lines(slurp(dir.path() / "s" / "manifest.csv")) == 201);
  CHECK(manifest(dir.path() / "s")["seeds"]["seed"] == 7);
}

TEST_CASE("argument errors exit with the usage code") {
  TempDir dir("cli_usage");
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"synth", "--out", dir.path().string(), "--no-such-flag", "1"}).code == 2);
  CHECK(run({"synth"}).code == 2);

  const auto missing = run({"evaluate", "--out", (dir.path() / "e").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("checkpoint") != std::string::npos);

  const auto bad_window = run({"synth", "--n", "4", "--shape", "banana", "--out", (dir.path() / "b").string()});
  CHECK(bad_window.code == 2);

  CHECK(run({"--help"}).code == 0);
  CHECK(run({"train", "--help"}).code == 0);
}

TEST_CASE("runtime failures exit 1 with a structured error line") {
  TempDir dir("cli_runtime");
  const auto o = run({"evaluate", "--checkpoint", (dir.path() / "nowhere").string(), "--data",
                      (dir.path() / "none").string(), "--out", (dir.path() / "e").string()});
  CHECK(o.code == 1);
  CHECK(o.err.find("error kind=") != std::string::npos);
}

TEST_CASE("full pipeline and manifest re-runs") {
  TempDir dir("cli_pipeline");
  const fs::path root = dir.path();
  const auto s = [&](const char* name) { return (root / name).string(); };
  REQUIRE(run({"synth", "--n", "24", "--shape", "8x8x8", "--seed", "3", "--out", s("syn")}).code == 0);
  REQUIRE(run({"prepare", "--manifest", s("syn") + "/manifest.csv", "--seed", "3", "--out", s("prep")}).code == 0);
  CHECK(fs::exists(root / "prep" / "dataset.csv"));

  const std::vector<std::string> model{"--model.filters", "4", "--model.dense_units", "8"};
  auto with = [&](std::vector<std::string> base, const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };
  REQUIRE(run(with({"train", "--data", s("prep"), "--epochs", "2", "--seed", "5", "--out", s("tr")}, model)).code == 0);
  CHECK(fs::exists(root / "tr" / "checkpoint" / "checkpoint.json"));
  CHECK(lines(slurp(root / "tr" / "history.csv")) == 3);

  const std::string ck = s("tr") + "/checkpoint";
  REQUIRE(run({"evaluate", "--checkpoint", ck, "--data", s("prep"), "--out", s("ev")}).code == 0);
  const std::string metrics = slurp(root / "ev" / "metrics.csv");
  CHECK(metrics.rfind("threshold,accuracy,precision,recall,f1,kappa,auc,ece\n", 0) == 0);
  CHECK(lines(metrics) == 6);
  CHECK(fs::exists(root / "ev" / "predictions.csv"));

  REQUIRE(run({"calibrate", "--checkpoint", ck, "--data", s("prep"), "--out", s("cal")}).code == 0);
  CHECK(fs::file_size(root / "cal" / "reliability.svg") > 0);
  CHECK(fs::exists(root / "cal" / "reliability.csv"));

  REQUIRE(run({"uncertainty", "--checkpoint", ck, "--data", s("prep"), "--samples", "8", "--out", s("un")}).code == 0);
  const auto log = nlohmann::json::parse(slurp(root / "un" / "predictions.json"));
  REQUIRE(log.is_array());
  CHECK(log[0]["samples"].size() == 8);
  CHECK(fs::exists(root / "un" / "intervals.csv"));

  REQUIRE(run({"explain", "--checkpoint", ck, "--data", s("prep"), "--shap.grid", "2x2x1", "--shap.mode", "exact",
               "--out", s("ex")})
              .code == 0);
  const auto attr = nlohmann::json::parse(slurp(root / "ex" / "attribution.json"));
  CHECK(attr.size() == 2);
  CHECK(fs::file_size(root / "ex" / "attribution.svg") > 0);

  for (const char* d : {"syn", "prep", "tr", "ev", "cal", "un", "ex"}) {
    CAPTURE(d);
    const auto m = manifest(root / d);
    CHECK(m.contains("config"));
    CHECK(m["seeds"].contains("seed"));
    CHECK(m["versions"].contains("voxbayes"));
  }
  CHECK(manifest(root / "tr")["seeds"]["seed"] == 5);

  for (const char* d : {"tr", "ev", "un", "ex"}) {
    CAPTURE(d);
    const fs::path first = root / d;
    const fs::path again = root / (std::string(d) + "_again");
    const auto m = manifest(first);
    REQUIRE(run({m["command"].get<std::string>(), "--config", (first / "manifest.json").string(), "--out",
                 again.string()})
                .code == 0);
    for (const auto& rel : m["outputs"]) {
      CAPTURE(rel.get<std::string>());
      CHECK(slurp(first / rel.get<std::string>()) == slurp(again / rel.get<std::string>()));
    }
    CHECK(slurp(first / "manifest.json") == slurp(again / "manifest.json"));
  }
}
