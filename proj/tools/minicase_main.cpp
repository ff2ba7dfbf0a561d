// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: one subcommand per pipeline stage plus `all`.

#include "minicase/error.hpp"
#include "minicase/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace minicase;

int main(int argc, char **argv) {
  CLI::App app{"minicase: tensor graph optimizer, distributor and scheduler"};
  app.require_subcommand(1);
  PipelineConfig c;

  using Stage = StageResult (*)(const PipelineConfig &);
  const std::map<std::string, std::pair<Stage, std::string>> stages{
      {"optimize", {stage_optimize, "saturate with rewrite rules and extract the cheapest graph"}},
      {"distribute", {stage_distribute, "choose SBP strategies and insert boxing for a device mesh"}},
      {"schedule", {stage_schedule, "search fusion and loop order, then solve tile sizes"}},
      {"plan", {stage_plan, "assign arena offsets to every buffer"}},
      {"run", {stage_run, "execute every lowering on random inputs and compare"}},
      {"report", {stage_report, "collect the readable stage reports"}},
      {"calibrate", {stage_calibrate, "fit microkernel costs from measured samples"}},
  };

  auto add_common = [&](CLI::App *s) {
    s->add_option("--graph", c.graph, "graph JSON file or bundled example (fig2, attention, mlp2, tile_mm)");
    s->add_option("--hw", c.hw, "hardware JSON file (default: desk machine)");
    s->add_option("--mesh", c.mesh, "device mesh such as 2 or 2x2");
    s->add_option("--rules", c.rules, "rule families, comma separated")->capture_default_str();
    s->add_option("--extract", c.extract, "exact, greedy or none")
        ->check(CLI::IsMember({"exact", "greedy", "none"}))
        ->capture_default_str();
    s->add_option("--levels", c.levels, "memory levels in tile graphs")->check(CLI::Range(1, 8))->capture_default_str();
    s->add_option("--iters", c.iters, "search iterations")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--seed", c.seed, "random seed")->capture_default_str();
    s->add_option("--threads", c.threads, "parallel leaf evaluations")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--out", c.out, "artifact directory")->capture_default_str();
    s->add_option("--ukernels", c.ukernels, "microkernel table JSON");
    s->add_option("--samples", c.samples, "calibration samples CSV");
  };

  std::map<CLI::App *, std::string> names;
  for (const auto &[name, entry] : stages) {
    auto *s = app.add_subcommand(name, entry.second);
    add_common(s);
    names[s] = name;
  }
  auto *all = app.add_subcommand("all", "run optimize through report");
  add_common(all);

  CLI11_PARSE(app, argc, argv);

  std::string current;
  try {
    if (all->parsed()) {
      auto results = run_pipeline(c, &current);
      std::cout << results.back().report;
    } else {
      for (const auto &[s, name] : names)
        if (s->parsed()) {
          current = name;
          std::cout << stages.at(name).first(c).report;
        }
    }
  } catch (const Error &e) {
    std::cerr << "minicase: stage " << current << " failed: " << e.what() << "\n";
    return exit_status(e.code());
  } catch (const std::exception &e) {
    std::cerr << "minicase: stage " << current << " failed: " << e.what() << "\n";
    return exit_status(ErrorCode::Internal);
  }
  return 0;
}
