// Copyright 2026 The corrstruct Authors
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

// Command-line front end: synth, train, match, eval, inspect.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corrstruct/config.hpp"
#include "corrstruct/csv.hpp"
#include "corrstruct/error.hpp"
#include "corrstruct/evaluation.hpp"
#include "corrstruct/manifest.hpp"
#include "corrstruct/matching.hpp"
#include "corrstruct/metric.hpp"
#include "corrstruct/multistructure.hpp"
#include "corrstruct/parallel.hpp"
#include "corrstruct/structure.hpp"
#include "corrstruct/synth.hpp"

namespace fs = std::filesystem;
using namespace corrstruct;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<int> max_iters;
  std::optional<int> splits;
  std::optional<double> epsilon;
  std::optional<double> t_c;
  std::optional<int> t_d;
  std::optional<std::string> multi;
  bool eval_module = false;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Pipeline config file (key = value)");
  app->add_option("--max-iters", o.max_iters, "Boosting iteration cap");
  app->add_option("--epsilon", o.epsilon, "Structure update rate");
  app->add_option("--t-c", o.t_c, "Correspondence threshold T_c");
  app->add_option("--t-d", o.t_d, "Search range threshold T_d");
  app->add_option("--multi", o.multi, "Multi-structure mode: off, manual, auto");
  app->add_flag("--eval-module", o.eval_module, "Accept updates only when the objective does not worsen");
}

PipelineConfig effective_config(const Overrides& o) {
  PipelineConfig cfg = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  if (o.max_iters) cfg.learn.max_iters = *o.max_iters;
  if (o.splits) cfg.protocol.splits = *o.splits;
  if (o.epsilon) cfg.learn.epsilon = *o.epsilon;
  if (o.t_c) cfg.learn.t_c = *o.t_c;
  if (o.t_d) cfg.learn.t_d = *o.t_d;
  if (o.eval_module) cfg.learn.use_eval_module = true;
  if (o.multi) {
    if (*o.multi == "off") cfg.multi.mode = MultiMode::kOff;
    else if (*o.multi == "manual") cfg.multi.mode = MultiMode::kManual;
    else if (*o.multi == "auto") cfg.multi.mode = MultiMode::kAuto;
    else throw Error(ErrorCode::kUsage, "--multi must be off, manual or auto");
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t k = 0; k < n; ++k) ids[k] = k;
  return ids;
}

PoseShift parse_pose(const std::string& text) {
  // label:probability:dy:dx
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ':')) parts.push_back(part);
  if (parts.size() != 4) throw Error(ErrorCode::kUsage, "--pose expects label:probability:dy:dx, got " + text);
  try {
    return {parts[0], std::stod(parts[1]), std::stoi(parts[2]), std::stoi(parts[3])};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kUsage, "--pose expects label:probability:dy:dx, got " + text);
  }
}

void write_trace_csv(const fs::path& path, const LearnTrace& trace) {
  std::ostringstream out;
  out << "iteration,objective,accepted,checksum\n";
  for (const auto& e : trace.entries) {
    out << e.iteration << ',' << format_double(e.objective) << ',' << (e.accepted ? 1 : 0) << ','
        << e.checksum << '\n';
  }
  write_text(path, out.str());
}

int run(int argc, char** argv) {
  CLI::App app{"Correspondence-structure person re-identification toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  std::uint64_t seed = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Master random seed");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-camera dataset");
  std::string synth_out;
  int identities = 50;
  TransformSpec spec;
  std::vector<std::string> poses;
  std::string synth_config;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--identities", identities, "Number of identities");
  synth->add_option("--dy", spec.dy, "Vertical shift in gallery strides");
  synth->add_option("--dx", spec.dx, "Horizontal shift in gallery strides");
  synth->add_option("--pose", poses, "Pose override label:probability:dy:dx (repeatable)");
  synth->add_option("--gain-min", spec.gain_min, "Lower illumination gain");
  synth->add_option("--gain-max", spec.gain_max, "Upper illumination gain");
  synth->add_option("--noise-sigma", spec.noise_sigma, "Gaussian pixel noise, intensity units");
  synth->add_option("--config", synth_config, "Config supplying the gallery grid and T_d");

  // train
  auto* train = app.add_subcommand("train", "Fit metric and correspondence structure(s)");
  std::string train_manifest, train_out, trace_csv;
  Overrides train_over;
  train->add_option("--manifest", train_manifest, "Dataset manifest CSV")->required();
  train->add_option("--out", train_out, "Model output directory")->required();
  train->add_option("--trace-csv", trace_csv, "Write the learning trace here");
  add_overrides(train, train_over);

  // match
  auto* match = app.add_subcommand("match", "Score one probe against every gallery image");
  std::string match_manifest, model_dir, probe_id, match_out;
  bool greedy = false;
  match->add_option("--manifest", match_manifest, "Dataset manifest CSV")->required();
  match->add_option("--model", model_dir, "Directory written by train")->required();
  match->add_option("--probe", probe_id, "Probe image_id (camera A)")->required();
  match->add_option("--out", match_out, "Output CSV (stdout when omitted)");
  match->add_flag("--greedy", greedy, "Per-row argmax instead of one-to-one matching");

  // eval
  auto* eval = app.add_subcommand("eval", "Run the split protocol and write CMC curves");
  std::string eval_manifest, eval_out;
  std::vector<std::string> method_names;
  Overrides eval_over;
  eval->add_option("--manifest", eval_manifest, "Dataset manifest CSV")->required();
  eval->add_option("--out", eval_out, "Output directory")->required();
  eval->add_option("--methods", method_names,
                   "proposed, non-structure, simple-average, ac-global, non-global, multi");
  eval->add_option("--splits", eval_over.splits, "Number of random splits");
  add_overrides(eval, eval_over);

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Export a structure as a dense heatmap CSV");
  std::string structure_path, inspect_out;
  int downsample = 1;
  inspect->add_option("--structure", structure_path, "Structure file")->required();
  inspect->add_option("--out", inspect_out, "Output CSV")->required();
  inspect->add_option("--downsample", downsample, "Average k×k blocks")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << error_code_name(ErrorCode::kUsage) << ": " << e.what() << '\n';
    return exit_status(ErrorCode::kUsage);
  }
  set_thread_count(threads);

  if (*synth) {
    PipelineConfig cfg = synth_config.empty() ? PipelineConfig{} : load_config(synth_config);
    for (const auto& p : poses) spec.pose_mix.push_back(parse_pose(p));
    const auto data = generate_dataset(seed, identities, spec, cfg.gallery_grid, cfg.learn.t_d);
    write_dataset(synth_out, data);
    std::cout << "wrote " << data.rows.size() << " images to " << synth_out << '\n';
  } else if (*train) {
    const PipelineConfig cfg = effective_config(train_over);
    const Dataset data = load_dataset(parse_manifest(train_manifest), cfg);
    const auto ids = all_ids(data.size());
    const FittedPipeline fit = fit_pipeline(data, ids, cfg, seed);
    make_dirs(train_out);
    save_metric_bank(fs::path(train_out) / "bank.mbnk", *fit.bank, fit.pca);
    save_structure(fs::path(train_out) / "structure.cstr", fit.structure);
    if (fit.registry) save_registry(fs::path(train_out) / "registry", *fit.registry);
    write_text(fs::path(train_out) / "config.toml", dump_config(cfg));
    if (!trace_csv.empty()) write_trace_csv(trace_csv, fit.trace);
    const auto& last = fit.trace.entries.back();
    std::cout << "iterations " << last.iteration << ", objective " << format_double(last.objective)
              << '\n';
  } else if (*match) {
    const fs::path dir(model_dir);
    const PipelineConfig cfg = load_config(dir / "config.toml");
    const Manifest manifest = parse_manifest(match_manifest);
    const Dataset data = load_dataset(manifest, cfg);
    std::optional<PcaModel> pca;
    const MetricBank bank = load_metric_bank(dir / "bank.mbnk", &pca);
    const CorrespondenceStructure structure = load_structure(dir / "structure.cstr");
    std::optional<StructureRegistry> registry;
    if (fs::exists(dir / "registry" / "registry.json")) registry = load_registry(dir / "registry");

    std::size_t probe_k = data.size();
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (data.probe_rows[k].image_id == probe_id) probe_k = k;
    }
    if (probe_k == data.size()) throw Error(ErrorCode::kUsage, "no camera-A image with id " + probe_id);
    const auto ids = all_ids(data.size());
    const std::vector<std::size_t> probe_ids{probe_k};
    const auto probe = project_images(data, probe_ids, false, pca).front();
    const auto gallery = project_images(data, ids, true, pca);

    const Matcher matcher(bank);
    std::map<std::string, MaskedStructure> masks;
    masks.emplace(structure.tag(), MaskedStructure(structure, cfg.learn.t_c));
    if (registry) {
      for (const auto& [key, s] : registry->locals) masks.emplace(s.tag(), MaskedStructure(s, cfg.learn.t_c));
      masks.insert_or_assign(registry->global_structure.tag(),
                             MaskedStructure(registry->global_structure, cfg.learn.t_c));
    }
    const StructurePicker pick = [&](std::size_t b) -> const MaskedStructure& {
      if (!registry) return masks.at(structure.tag());
      return masks.at(select_structure(probe, gallery[b], *registry).tag());
    };
    const RankedGallery ranked =
        rank_gallery(matcher, probe, gallery, pick, greedy ? Solver::kGreedy : Solver::kGlobal);
    std::ostringstream out;
    out << "probe_id,gallery_id,score,rank\n";
    for (std::size_t r = 0; r < ranked.order.size(); ++r) {
      const std::size_t b = ranked.order[r];
      out << probe_id << ',' << gallery[b].image_id << ',' << format_double(ranked.scores[b]) << ','
          << r + 1 << '\n';
    }
    if (match_out.empty()) std::cout << out.str();
    else write_text(match_out, out.str());
  } else if (*eval) {
    const PipelineConfig cfg = effective_config(eval_over);
    std::vector<Method> methods;
    for (const auto& name : method_names) {
      const auto m = parse_method(name);
      if (!m) throw Error(ErrorCode::kUsage, "unknown method " + name);
      methods.push_back(*m);
    }
    if (methods.empty()) {
      methods = all_single_methods();
      if (cfg.multi.mode != MultiMode::kOff) methods.push_back(Method::kMulti);
    }
    const Dataset data = load_dataset(parse_manifest(eval_manifest), cfg);
    const ExperimentReport report = run_experiment(data, cfg, methods, seed);
    make_dirs(eval_out);
    write_cmc_csv(fs::path(eval_out) / "cmc.csv", report);
    write_timing_csv(fs::path(eval_out) / "timing.csv", report);
    for (Method m : report.methods) {
      std::cout << method_name(m) << " rank-1 " << format_double(report.mean.at(m).rate(1)) << '\n';
    }
  } else if (*inspect) {
    export_heatmap_csv(inspect_out, load_structure(structure_path), downsample);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_code_name(ErrorCode::kIoError) << ": " << e.what() << '\n';
    return exit_status(ErrorCode::kIoError);
  }
}
