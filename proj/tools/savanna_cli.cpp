// Copyright 2026 The Savanna Authors
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

// Command-line front end: dataset pipeline stages, the synthetic generator
// and the HTTP service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "savanna/dataset.hpp"
#include "savanna/error.hpp"
#include "savanna/log.hpp"
#include "savanna/service.hpp"
#include "savanna/synth.hpp"

namespace {

using savanna::FeatureKind;
namespace fs = std::filesystem;

struct PipelineFlags {
  int k = 100;
  double gsd = 8.0;
  std::string kind = "combined";
  int patches = 20000;
  int positive_patches = 5000;
  std::uint64_t seed = 0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--k", f.k, "Codebook size")->check(CLI::PositiveNumber);
  cmd->add_option("--gsd", f.gsd, "Working ground sampling distance in cm")->check(CLI::PositiveNumber);
  cmd->add_option("--kind", f.kind, "Descriptor: hoc, bovw or combined")
      ->check(CLI::IsMember({"hoc", "bovw", "combined"}));
  cmd->add_option("--patches", f.patches, "Patches sampled for the codebook")->check(CLI::PositiveNumber);
  cmd->add_option("--positive-patches", f.positive_patches, "Of which centred on animal pixels")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", f.seed, "Seed for patch sampling and k-means");
}

savanna::PipelineConfig pipeline_config(PipelineFlags const& f) {
  savanna::PipelineConfig cfg;
  cfg.k = f.k;
  cfg.gsd_cm = f.gsd;
  cfg.kind = savanna::parse_feature_kind(f.kind);
  cfg.features.patches.n_total = f.patches;
  cfg.features.patches.n_positive = f.positive_patches;
  cfg.features.patches.seed = f.seed;
  cfg.features.kmeans.seed = f.seed;
  cfg.features.kmeans.k = f.k;
  cfg.grid.seed = f.seed;
  return cfg;
}

savanna::Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-automatic wildlife detection in aerial imagery"};
  app.require_subcommand(1);
  PipelineFlags flags;
  std::string dir;

  auto* ingest = app.add_subcommand("ingest", "Validate images and write manifest.json");
  double fallback_gsd = 4.0;
  ingest->add_option("dir", dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--fallback-gsd", fallback_gsd, "GSD for images without metadata (cm)");

  struct Stage {
    char const* name;
    char const* help;
  };
  std::vector<Stage> const stages{{"fuse", "Fuse volunteer polygons into ground truth"},
                                  {"proposals", "Generate and label candidate regions"},
                                  {"codebook", "Learn the visual-word codebook"},
                                  {"features", "Extract descriptors for every proposal"},
                                  {"train", "Train the exemplar ensemble"},
                                  {"export", "Write the merged ground truth"}};
  std::map<std::string, CLI::App*> stage_cmds;
  for (auto const& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    cmd->add_option("dataset", dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    add_pipeline_flags(cmd, flags);
    stage_cmds[s.name] = cmd;
  }

  auto* evaluate = app.add_subcommand("evaluate", "Balanced ablation grid and unbalanced run");
  bool grid = false, no_unbalanced = false;
  std::vector<std::string> kinds{"hoc", "bovw", "combined"};
  std::vector<int> ks{100};
  std::vector<double> gsds{8.0};
  int repeats = 5;
  evaluate->add_option("dataset", dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_flag("--grid", grid, "Run the balanced ablation grid");
  evaluate->add_flag("--no-unbalanced", no_unbalanced, "Skip the unbalanced ensemble run");
  evaluate->add_option("--kinds", kinds, "Grid descriptors")->delimiter(',');
  evaluate->add_option("--ks", ks, "Grid codebook sizes")->delimiter(',');
  evaluate->add_option("--gsds", gsds, "Grid working GSDs in cm")->delimiter(',');
  evaluate->add_option("--repeats", repeats, "Negative draws per cell")->check(CLI::PositiveNumber);
  add_pipeline_flags(evaluate, flags);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic savanna dataset");
  std::string params_file, out_dir;
  bool print_params = false;
  synth->add_option("--params", params_file, "JSON parameter file")->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output dataset directory");
  synth->add_flag("--print-params", print_params, "Print the effective parameters and exit");

  auto* serve = app.add_subcommand("serve", "Serve the JSON API");
  std::string root = ".", host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--root", root, "Directory holding dataset directories");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  add_pipeline_flags(serve, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      auto rep = savanna::ingest_dataset(dir, fallback_gsd);
      nlohmann::ordered_json j{{"dataset_id", rep.manifest.dataset_id},
                               {"images", rep.manifest.images.size()},
                               {"annotation_files", rep.manifest.annotation_files.size()}};
      auto& rejected = j["rejected"] = nlohmann::ordered_json::array();
      for (auto const& r : rep.rejected) rejected.push_back({{"file", r.file}, {"reason", r.reason}});
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (synth->parsed()) {
      savanna::SynthParams p;
      if (!params_file.empty()) {
        std::ifstream in(params_file);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        p = savanna::synth_params_from_json(text);
      }
      p.validate();
      if (print_params) {
        std::cout << savanna::to_json(p) << "\n";
        return 0;
      }
      if (out_dir.empty()) throw savanna::Error(savanna::ErrorCode::kInvalidArgument, "--out is required");
      auto data = savanna::synth_generate(p);
      savanna::write_synth_dataset(data, out_dir);
      auto rep = savanna::ingest_dataset(out_dir, p.gsd_cm);
      std::cout << nlohmann::ordered_json{{"dataset", out_dir},
                                          {"images", rep.manifest.images.size()},
                                          {"animals", data.ground_truth.size()}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (serve->parsed()) {
      savanna::ServiceConfig cfg;
      cfg.data_root = root;
      cfg.pipeline = pipeline_config(flags);
      savanna::Service service(cfg);
      int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << host << ":" << bound << "\n";
      service.listen();
      return 0;
    }

    auto cfg = pipeline_config(flags);
    if (evaluate->parsed()) {
      cfg.grid.kinds.clear();
      for (auto const& k : kinds) cfg.grid.kinds.push_back(savanna::parse_feature_kind(k));
      cfg.grid.ks = ks;
      cfg.grid.gsds_cm = gsds;
      cfg.grid.repeats = repeats;
      cfg.grid.validate();
    }
    auto dataset = savanna::Dataset::open(dir, cfg);
    if (evaluate->parsed()) {
      std::vector<std::string> run;
      if (grid) {
        dataset.evaluate(true, !no_unbalanced);
      } else if (!no_unbalanced) {
        dataset.evaluate(false, true);
      }
      auto eval = dataset.root() / "derived" / "eval";
      for (auto const& name : {"ablation.json", "unbalanced.json"}) {
        if (fs::exists(eval / name)) {
          std::ifstream in(eval / name);
          std::cout << in.rdbuf() << "\n";
        }
      }
      return 0;
    }
    if (stage_cmds["export"]->parsed()) {
      std::cout << dataset.export_ground_truth().string() << "\n";
      return 0;
    }
    for (auto const& s : stages) {
      if (stage_cmds[s.name]->parsed()) std::cout << dataset.run_stages({s.name}) << "\n";
    }
    return 0;
  } catch (savanna::Error const& e) {
    std::cerr << "error: " << savanna::to_string(e.code()) << ": " << e.what();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << "\n";
    return 1;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
