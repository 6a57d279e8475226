// Copyright 2026 The segkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// segkit command-line tool.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "segkit/png_io.hpp"
#include "segkit/segkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { kError, kWarn, kInfo, kDebug };

LogLevel g_log_level = LogLevel::kWarn;

void log(LogLevel level, const std::string& msg) {
  static const char* const kNames[] = {"error", "warn", "info", "debug"};
  if (level <= g_log_level) std::cerr << "segkit: " << kNames[static_cast<int>(level)] << ": " << msg << "\n";
}

json read_json_file(const fs::path& path) { return segkit::detail::parse_json(segkit::detail::read_file(path), path.string()); }

// Output name for an augmented image: the input's file name with a .png
// extension.
std::string png_name(const std::string& file_name, std::int64_t id) {
  fs::path p = fs::path(file_name).filename();
  if (p.empty()) p = "image_" + std::to_string(id);
  p.replace_extension(".png");
  return p.string();
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string log_level = "warn";
};

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  fs::path config;
  fs::path dataset;
  fs::path out;
  fs::path images_dir;
  bool no_copy_paste = false;
};

int run_augment(const AugmentArgs& a, const Globals& g) {
  const segkit::AugmentConfig cfg =
      a.config.empty() ? segkit::AugmentConfig{} : segkit::augment_config_from_json(read_json_file(a.config));
  const segkit::Dataset ds = segkit::load_coco(a.dataset);
  const fs::path images_dir = a.images_dir.empty() ? a.dataset.parent_path() : a.images_dir;
  const std::uint64_t seed = g.seed.value_or(0);

  std::vector<const segkit::ImageInfo*> order;
  for (const auto& img : ds.images) order.push_back(&img);
  std::sort(order.begin(), order.end(), [](auto* x, auto* y) { return x->id < y->id; });

  std::vector<segkit::Sample> samples(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const fs::path path = images_dir / order[i]->file_name;
    log(LogLevel::kDebug, "reading " + path.string());
    segkit::ImageBuffer img = segkit::read_png(path);
    if (img.height() != order[i]->height || img.width() != order[i]->width) {
      throw segkit::Error(segkit::Errc::kShapeMismatch,
                          path.string() + " does not match the extent recorded in the dataset");
    }
    samples[i] = segkit::make_sample(std::move(img), ds, order[i]->id);
  }

  auto can_paste = [](const segkit::Sample& s) {
    return std::any_of(s.instances.begin(), s.instances.end(),
                       [](const segkit::Instance& x) { return !x.iscrowd && x.area() > 0; });
  };

  // Each image takes its copy-paste source from the next image by id.
  std::vector<segkit::Sample> outputs(order.size());
  const segkit::RandomStream run(seed);
  segkit::parallel_for(order.size(), [&](std::size_t i) {
    const segkit::Sample* source = nullptr;
    if (!a.no_copy_paste && order.size() > 1) {
      const auto& candidate = samples[(i + 1) % order.size()];
      if (can_paste(candidate)) source = &candidate;
    }
    outputs[i] = segkit::augment_sample(samples[i], source, cfg,
                                        run.child(static_cast<std::uint64_t>(order[i]->id)));
  });

  fs::create_directories(a.out);
  segkit::Dataset out_ds;
  out_ds.categories = ds.categories;
  std::int64_t next_ann = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const segkit::Sample& s = outputs[i];
    const std::string name = png_name(order[i]->file_name, order[i]->id);
    segkit::write_png(s.image, a.out / name);
    out_ds.images.push_back(segkit::ImageInfo{order[i]->id, name, s.image.height(), s.image.width()});
    for (auto ann : segkit::to_annotations(s, order[i]->id)) {
      ann.id = next_ann++;
      out_ds.annotations.push_back(std::move(ann));
    }
  }
  segkit::write_coco(out_ds, a.out / "annotations.json");
  log(LogLevel::kInfo, "wrote " + std::to_string(order.size()) + " images to " + a.out.string());
  return 0;
}

// ---------------------------------------------------------------------------
// postprocess

struct PostprocessArgs {
  fs::path in;
  fs::path out;
  fs::path config;
  std::optional<std::string> method;
  std::optional<double> sigma;
  std::optional<double> iou_threshold;
  std::optional<double> score_floor;
  std::optional<std::size_t> max_keep;
  std::optional<std::string> overlap;
  bool no_calibrate = false;
};

int run_postprocess(const PostprocessArgs& a) {
  json section = json::object();
  if (!a.config.empty()) {
    json j = read_json_file(a.config);
    // Either a bare postprocess section or a pipeline config holding one.
    section = j.contains("postprocess") ? j["postprocess"] : j;
  }
  if (a.method) section["method"] = *a.method;
  if (a.sigma) section["sigma"] = *a.sigma;
  if (a.iou_threshold) section["iou_threshold"] = *a.iou_threshold;
  if (a.score_floor) section["score_floor"] = *a.score_floor;
  if (a.max_keep) section["max_keep"] = *a.max_keep;
  if (a.overlap) section["overlap"] = *a.overlap;
  if (a.no_calibrate) section["calibrate"] = false;
  const segkit::PostprocessConfig cfg = segkit::postprocess_config_from_json(section);
  const auto dets = segkit::load_results(a.in);
  const auto out = segkit::postprocess(dets, cfg);
  segkit::write_results(out, a.out);
  log(LogLevel::kInfo, std::to_string(dets.size()) + " detections in, " + std::to_string(out.size()) + " out");
  return 0;
}

// ---------------------------------------------------------------------------
// swa

int run_swa(const std::vector<fs::path>& inputs, const fs::path& out) {
  std::vector<segkit::Checkpoint> cks;
  cks.reserve(inputs.size());
  for (const auto& p : inputs) cks.push_back(segkit::read_archive(p));
  segkit::write_archive(segkit::average_checkpoints(cks), out);
  log(LogLevel::kInfo, "averaged " + std::to_string(cks.size()) + " checkpoints");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  fs::path gt;
  fs::path results;
  fs::path out;
  std::optional<std::string> iou_kind;
  std::optional<std::size_t> max_dets;
};

int run_eval(const EvalArgs& a) {
  segkit::EvalParams p;
  if (a.iou_kind) p.iou_kind = *a.iou_kind == "box" ? segkit::IouKind::kBox : segkit::IouKind::kMask;
  if (a.max_dets) p.max_dets = *a.max_dets;
  const segkit::Dataset gt = segkit::load_coco(a.gt);
  const auto dets = segkit::load_results(a.results);
  const std::string report = segkit::to_json(segkit::evaluate(dets, gt, p)).dump();
  if (!a.out.empty()) segkit::detail::write_file(a.out, report + "\n");
  std::cout << report << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

int run_pipeline_cmd(const fs::path& config, const fs::path& output, const Globals& g) {
  json j = read_json_file(config);
  if (g.seed && j.is_object()) {
    j["seed"] = *g.seed;
    if (j.contains("detector") && j["detector"].contains("oracle") && j["detector"]["oracle"].is_object()) {
      j["detector"]["oracle"]["seed"] = *g.seed;
    }
  }
  segkit::PipelineConfig cfg = segkit::pipeline_config_from_json(j, config.parent_path());
  if (!output.empty()) cfg.output = output;
  const segkit::PipelineResult r = segkit::run_pipeline(cfg);
  std::cout << segkit::to_json(r.report).dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// selftest and synth

int run_selftest_cmd(const Globals& g) {
  bool ok = true;
  for (const auto& r : segkit::run_selftest(g.seed.value_or(0))) {
    char timing[32];
    std::snprintf(timing, sizeof(timing), "%.2fs", r.seconds);
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << timing << ")";
    if (!r.passed) std::cout << ": " << r.detail;
    std::cout << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

struct SynthArgs {
  fs::path out;
  int images = 20;
  int height = 256;
  int width = 256;
  int categories = 1;
  int max_instances = 6;
};

int run_synth(const SynthArgs& a, const Globals& g) {
  segkit::SyntheticSpec spec;
  spec.num_images = a.images;
  spec.height = a.height;
  spec.width = a.width;
  spec.num_categories = a.categories;
  spec.max_instances = a.max_instances;
  spec.seed = g.seed.value_or(0);
  const segkit::SyntheticData data = segkit::make_synthetic(spec);
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    segkit::write_png(data.images[i], a.out / data.dataset.images[i].file_name);
  }
  segkit::write_coco(data.dataset, a.out / "annotations.json");
  log(LogLevel::kInfo, "wrote " + std::to_string(data.images.size()) + " images to " + a.out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segkit: instance-segmentation toolkit"};
  app.set_version_flag("--version", std::string(segkit::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Run seed (overrides config files)");
  app.add_option("--log-level", g.log_level, "Diagnostics on stderr")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Augment a COCO dataset and write PNGs plus annotations");
  augment->add_option("--config", aug.config, "Augment config JSON")->check(CLI::ExistingFile);
  augment->add_option("--dataset", aug.dataset, "COCO annotations JSON")->required();
  augment->add_option("--images-dir", aug.images_dir, "Image directory (default: next to the dataset)");
  augment->add_option("--out", aug.out, "Output directory")->required();
  augment->add_flag("--no-copy-paste", aug.no_copy_paste, "Skip the copy-paste stage");

  PostprocessArgs pp;
  auto* post = app.add_subcommand("postprocess", "Calibrate scores and apply soft-NMS to a results file");
  post->add_option("--in", pp.in, "Input results JSON")->required();
  post->add_option("--out", pp.out, "Output results JSON")->required();
  post->add_option("--config", pp.config, "Postprocess or pipeline config JSON");
  post->add_option("--method", pp.method)->check(CLI::IsMember({"gaussian", "linear"}));
  post->add_option("--sigma", pp.sigma);
  post->add_option("--iou-threshold", pp.iou_threshold);
  post->add_option("--score-floor", pp.score_floor);
  post->add_option("--max-keep", pp.max_keep);
  post->add_option("--overlap", pp.overlap)->check(CLI::IsMember({"box", "mask"}));
  post->add_flag("--no-calibrate", pp.no_calibrate);

  std::vector<fs::path> swa_inputs;
  fs::path swa_out;
  auto* swa = app.add_subcommand("swa", "Average SWA1 checkpoint archives");
  swa->add_option("--inputs", swa_inputs, "Input archives")->required()->expected(1, -1);
  swa->add_option("--out", swa_out, "Output archive")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Mask AP@[0.50:0.95] of a results file");
  eval->add_option("--gt", ev.gt, "COCO ground truth JSON")->required();
  eval->add_option("--results", ev.results, "Results JSON")->required();
  eval->add_option("--out", ev.out, "Also write the report here");
  eval->add_option("--iou-kind", ev.iou_kind)->check(CLI::IsMember({"mask", "box"}));
  eval->add_option("--max-dets", ev.max_dets);

  fs::path pipe_config;
  fs::path pipe_output;
  auto* pipeline = app.add_subcommand("pipeline", "Detect, fuse TTA views and evaluate");
  pipeline->add_option("--config", pipe_config, "Pipeline config JSON")->required();
  pipeline->add_option("--output", pipe_output, "Merged results JSON (overrides the config)");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--images", syn.images)->check(CLI::PositiveNumber);
  synth->add_option("--height", syn.height)->check(CLI::PositiveNumber);
  synth->add_option("--width", syn.width)->check(CLI::PositiveNumber);
  synth->add_option("--categories", syn.categories)->check(CLI::PositiveNumber);
  synth->add_option("--max-instances", syn.max_instances)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  static const std::map<std::string, LogLevel> kLevels{
      {"error", LogLevel::kError}, {"warn", LogLevel::kWarn}, {"info", LogLevel::kInfo}, {"debug", LogLevel::kDebug}};
  g_log_level = kLevels.at(g.log_level);

  try {
    if (augment->parsed()) return run_augment(aug, g);
    if (post->parsed()) return run_postprocess(pp);
    if (swa->parsed()) return run_swa(swa_inputs, swa_out);
    if (eval->parsed()) return run_eval(ev);
    if (pipeline->parsed()) return run_pipeline_cmd(pipe_config, pipe_output, g);
    if (selftest->parsed()) return run_selftest_cmd(g);
    if (synth->parsed()) return run_synth(syn, g);
  } catch (const segkit::Error& e) {
    log(LogLevel::kError, e.what());
    return 1;
  } catch (const std::exception& e) {
    log(LogLevel::kError, e.what());
    return 1;
  }
  return 2;
}
