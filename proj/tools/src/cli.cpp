// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>

#include "config.hpp"
#include "io.hpp"
#include "voxbayes/autodiff.hpp"
#include "voxbayes/calibration.hpp"
#include "voxbayes/checkpoint.hpp"
#include "voxbayes/errors.hpp"
#include "voxbayes/nifti.hpp"
#include "voxbayes/shap.hpp"
#include "voxbayes/synth.hpp"
#include "voxbayes/train.hpp"
#include "voxbayes/uncertainty.hpp"
#include "voxbayes/version.hpp"

namespace voxbayes::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  std::string command;
  RunConfig config;
  fs::path out;
  std::ostream& log;
  std::vector<std::string> outputs;

  void write(const std::string& name, const std::string& text) {
    write_text(out / name, text);
    outputs.push_back(name);
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_manifest_json(Context& ctx) {
  std::sort(ctx.outputs.begin(), ctx.outputs.end());
  json j{{"command", ctx.command},
         {"config", ctx.config.to_json()},
         {"seeds", {{"seed", ctx.config.get_u64("seed")}}},
         {"versions", {{"voxbayes", kVersion}, {"checkpoint_format", kCheckpointFormatVersion}}},
         {"outputs", ctx.outputs}};
  write_text(ctx.out / "manifest.json", j.dump(2) + "\n");
}

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct LoadedModel {
  Checkpoint checkpoint;
  Model model;
  std::string id;
};

LoadedModel load_model(const RunConfig& cfg) {
  Checkpoint c = load_checkpoint(cfg.require("checkpoint"));
  Model m = model_from_checkpoint(c);
  std::string id = spec_hash(c.spec) + "-" + fnv_hex(encode_arrays(c.arrays));
  return {std::move(c), std::move(m), std::move(id)};
}

std::vector<LabeledSample> load_eval_split(const RunConfig& cfg) {
  auto samples = load_split(cfg.require("data.dir"), cfg.get("eval.split"));
  if (samples.empty()) throw ConfigError("split '" + cfg.get("eval.split") + "' is empty");
  return samples;
}

PredictConfig predict_config(const RunConfig& cfg) {
  return PredictConfig{.samples = cfg.get_size("predict.samples"), .seed = cfg.get_u64("seed")};
}

std::vector<double> predict_split(LoadedModel& lm, const std::vector<LabeledSample>& samples,
                                  const RunConfig& cfg, std::vector<int>& labels) {
  std::vector<const Volume*> volumes;
  labels.clear();
  for (const auto& s : samples) {
    volumes.push_back(&s.volume);
    labels.push_back(s.label);
  }
  return predict(lm.model, volumes, predict_config(cfg));
}

// ---------------------------------------------------------------------------

void cmd_synth(Context& ctx) {
  const auto& cfg = ctx.config;
  SynthConfig sc;
  sc.n = cfg.get_size("synth.n");
  sc.shape = cfg.get_extents("synth.shape");
  sc.seed = cfg.get_u64("seed");
  sc.noise_sigma = cfg.get_double("synth.noise_sigma");
  const auto samples = make_blob_dataset(sc);
  fs::create_directories(ctx.out / "volumes");
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    const Volume hu = to_hounsfield(s.volume);
    const std::string rel = "volumes/" + s.volume.source + ".nii";
    write_nifti(ctx.out / rel, make_nifti_header(hu, nifti_datatype::int16), hu);
    entries.push_back({rel, s.source_class});
  }
  std::string csv = "path,source_class\n";
  for (const auto& e : entries) csv += e.path + "," + to_string(e.source_class) + "\n";
  ctx.write("manifest.csv", csv);
  ctx.log << "synth: wrote " << samples.size() << " volumes to " << ctx.out.string() << "\n";
}

void cmd_prepare(Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path manifest = cfg.require("data.manifest");
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw ConfigError("manifest " + manifest.string() + " lists no volumes");
  const HuWindow window = hu_window(cfg.get("prepare.hu_window"));
  const auto ratios_list = cfg.get_list("prepare.split");
  if (ratios_list.size() != 3) throw ConfigError("prepare.split needs three ratios");
  const SplitRatios ratios{ratios_list[0], ratios_list[1], ratios_list[2]};

  fs::create_directories(ctx.out / "volumes");
  std::vector<PreparedEntry> prepared(entries.size());
  std::vector<std::size_t> dev;
  Shape shape;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const fs::path src = entries[i].path;
    Volume v = apply_hu_window(read_volume(src), window);
    if (shape.empty()) shape = v.shape();
    if (v.shape() != shape) {
      throw ShapeError(src.string() + ": shape " + shape_str(v.shape()) + " differs from " + shape_str(shape));
    }
    std::string stem = src.filename().string();
    for (const char* ext : {".gz", ".nii"}) {
      if (stem.ends_with(ext)) stem.resize(stem.size() - std::strlen(ext));
    }
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%05zu_", i);
    const std::string rel = "volumes/" + std::string(prefix) + stem + ".nii";
    write_nifti(ctx.out / rel, make_nifti_header(v, nifti_datatype::float32), v);
    prepared[i] = {rel, entries[i].source_class, "holdout"};
    if (!is_held_out(entries[i].source_class)) dev.push_back(i);
  }
  Rng rng(cfg.get_u64("seed"));
  const auto idx = split_indices(dev.size(), ratios, rng);
  for (auto i : idx.train) prepared[dev[i]].split = "train";
  for (auto i : idx.test) prepared[dev[i]].split = "test";
  for (auto i : idx.validation) prepared[dev[i]].split = "validation";
  write_dataset_index(ctx.out, prepared);
  ctx.outputs.push_back(kDatasetIndex);
  ctx.log << "prepare: " << dev.size() << " development volumes (" << idx.train.size() << " train, "
          << idx.test.size() << " test, " << idx.validation.size() << " validation), "
          << entries.size() - dev.size() << " held out\n";
}

void cmd_train(Context& ctx) {
  const auto& cfg = ctx.config;
  const fs::path data = cfg.require("data.dir");
  const auto train_set = load_split(data, "train");
  const auto val_set = load_split(data, "validation");
  if (train_set.empty() || val_set.empty()) throw ConfigError("dataset needs train and validation samples");
  const Shape& s = train_set.front().volume.shape();
  ReferenceOptions ro;
  ro.filters = cfg.get_size("model.filters");
  ro.dense_units = cfg.get_size("model.dense_units");
  ro.kernel = cfg.get_size("model.kernel");
  ro.dropout = cfg.get_double("model.dropout");
  const NetworkSpec spec = build_reference_model({s[0], s[1], s[2]}, parse_bayes_variant(cfg.get("model.variant")),
                                                 parse_head(cfg.get("model.head")), ro);
  TrainConfig tc;
  tc.learning_rate = cfg.get_double("train.learning_rate");
  tc.epochs = cfg.get_size("train.epochs");
  tc.batch_size = cfg.get_size("train.batch_size");
  tc.seed = cfg.get_u64("seed");
  tc.early_stop_patience = cfg.get_size("train.patience");
  tc.augment = cfg.get_bool("train.augment");
  tc.augment_policy.noise_sigma = cfg.get_double("train.noise_sigma");
  tc.augment_policy.max_angle_deg = cfg.get_double("train.max_angle");
  tc.validation_samples = cfg.get_size("train.validation_samples");
  auto result = train(spec, train_set, val_set, tc, [&](const EpochRecord& r) {
    ctx.log << "epoch " << r.epoch << " loss " << fmt(r.train_loss) << " val_accuracy " << fmt(r.val_accuracy)
            << "\n";
    ctx.log.flush();
  });
  save_checkpoint(ctx.out / "checkpoint", result.checkpoint);
  ctx.outputs.push_back("checkpoint/checkpoint.json");
  ctx.outputs.push_back("checkpoint/weights.bin");
  std::string csv = "epoch,train_loss,val_accuracy\n";
  for (const auto& r : result.history) {
    csv += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.val_accuracy) + "\n";
  }
  ctx.write("history.csv", csv);
}

void cmd_evaluate(Context& ctx) {
  const auto& cfg = ctx.config;
  auto lm = load_model(cfg);
  const auto samples = load_eval_split(cfg);
  std::vector<int> labels;
  const auto probs = predict_split(lm, samples, cfg, labels);
  ctx.write("metrics.csv", sweep_csv(threshold_sweep(probs, labels, cfg.get_list("eval.thresholds"))));
  std::string csv = "id,label,probability\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    csv += samples[i].volume.source + "," + std::to_string(labels[i]) + "," + fmt(probs[i]) + "\n";
  }
  ctx.write("predictions.csv", csv);
}

void cmd_calibrate(Context& ctx) {
  const auto& cfg = ctx.config;
  auto lm = load_model(cfg);
  const auto samples = load_eval_split(cfg);
  std::vector<int> labels;
  const auto probs = predict_split(lm, samples, cfg, labels);
  const auto report =
      calibration_report(probs, labels, cfg.get_double("calibration.threshold"), cfg.get_size("calibration.bins"));
  ctx.write("reliability.csv", reliability_csv(report));
  ctx.write("reliability.svg", reliability_diagram(report));
  ctx.log << "calibrate: ECE = " << fmt(report.ece) << " over " << report.n << " volumes\n";
}

void cmd_uncertainty(Context& ctx) {
  const auto& cfg = ctx.config;
  auto lm = load_model(cfg);
  const auto samples = load_eval_split(cfg);
  const std::size_t t = cfg.get_size("mc.samples");
  const double level = cfg.get_double("mc.level");
  const double width = cfg.get_double("mc.flag_width");
  const std::uint64_t seed = cfg.get_u64("seed");
  std::vector<PredictiveSamples> log;
  std::string csv = "id,label,mean,class1_lo,class1_hi,class0_lo,class0_hi,width,flag\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    PredictiveSamples ps = mc_predictive(lm.model, samples[i].volume, t, seed + i, samples[i].volume.source, lm.id);
    ps.label = samples[i].label;
    const auto iv = predictive_interval(ps, level);
    csv += ps.id + "," + std::to_string(samples[i].label) + "," + fmt(iv.mean) + "," + fmt(iv.class1.lo) + "," +
           fmt(iv.class1.hi) + "," + fmt(iv.class0.lo) + "," + fmt(iv.class0.hi) + "," + fmt(iv.width()) + "," +
           to_string(flag_high_uncertainty(iv, width)) + "\n";
    log.push_back(std::move(ps));
  }
  ctx.write("predictions.json", prediction_log_json(log));
  ctx.write("intervals.csv", csv);
}

void cmd_explain(Context& ctx) {
  const auto& cfg = ctx.config;
  auto lm = load_model(cfg);
  const auto samples = load_eval_split(cfg);
  const std::size_t index = cfg.get_size("shap.index");
  if (index >= samples.size()) {
    throw ConfigError("shap.index " + std::to_string(index) + " is outside the " + std::to_string(samples.size()) +
                      "-volume split");
  }
  const Volume& volume = samples[index].volume;
  const Extents3 grid = cfg.get_extents("shap.grid");
  const PatchPartition partition = partition_volume(volume.shape(), {grid[0], grid[1], grid[2]});
  const PredictConfig pc = predict_config(cfg);
  const ModelFn f = [&](const Volume& v) { return predict(lm.model, v, pc); };
  const Volume baseline = zeros_like(volume);
  const std::string mode = cfg.get("shap.mode");
  AttributionMap map;
  if (mode == "exact") {
    map = exact_shapley(f, volume, partition, baseline);
  } else if (mode == "sampled") {
    map = sampled_shapley(f, volume, partition, baseline, cfg.get_size("shap.permutations"), cfg.get_u64("seed"));
  } else {
    throw ConfigError("shap.mode must be exact or sampled, got '" + mode + "'");
  }
  ctx.write("attribution.json", attribution_json({for_class(map, 0), map}, "zeros"));
  ctx.write("attribution.svg", render_attribution_overlay(volume, partition, map));
}

struct Command {
  const char* name;
  const char* help;
  std::function<void(Context&)> fn;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"synth", "generate the synthetic blob dataset (int16 NIfTI + manifest.csv)", cmd_synth},
      {"prepare", "window, rotate and split a manifest of NIfTI volumes", cmd_prepare},
      {"train", "train the reference model on a prepared dataset", cmd_train},
      {"evaluate", "threshold sweep metrics on a split", cmd_evaluate},
      {"calibrate", "reliability bins, ECE and diagram", cmd_calibrate},
      {"uncertainty", "Monte-Carlo predictive intervals and review flags", cmd_uncertainty},
      {"explain", "Shapley attribution over voxel patches", cmd_explain},
  };
  return list;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a{
      {"synth.n", "--n"},         {"synth.shape", "--shape"},     {"data.dir", "--data"},
      {"data.manifest", "--manifest"}, {"model.variant", "--variant"}, {"model.head", "--head"},
      {"train.epochs", "--epochs"}, {"mc.samples", "--samples"},
  };
  return a;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"voxbayes: Bayesian 3D CNN toolkit for volumetric scans", "voxbayes"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key=value config file or a run manifest.json");
    sub->add_option("--out", out_dir, "output directory")->required();
    for (const auto& k : config_keys()) {
      std::string names = "--" + k.name;
      if (auto it = aliases().find(k.name); it != aliases().end()) names += "," + it->second;
      sub->add_option(names, flag_values[k.name], k.help);
    }
    subs[c.name] = sub;
  }

  std::vector<std::string> argv_store{"voxbayes"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "voxbayes: usage error: " << e.what() << "\n";
    CLI::App* active = &app;
    for (auto* s : app.get_subcommands()) active = s;
    err << active->help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    Context ctx{name, RunConfig{}, out_dir, err, {}};
    if (!config_path.empty()) ctx.config.load_file(config_path);
    for (const auto& k : config_keys()) {
      if (chosen->count("--" + k.name) > 0) ctx.config.set(k.name, flag_values[k.name]);
    }
    kernels::set_num_threads(static_cast<int>(ctx.config.get_size("threads")));
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec || !fs::is_directory(ctx.out)) throw IoError("cannot create output directory " + ctx.out.string());
    for (const auto& c : commands()) {
      if (c.name == name) c.fn(ctx);
    }
    write_manifest_json(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "voxbayes " << name << ": error kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    err << chosen->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "voxbayes " << name << ": error kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "voxbayes " << name << ": error kind=Internal message=\"" << e.what() << "\"\n";
    return kExitRuntime;
  }
}

}  // namespace voxbayes::cli
