// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// The compiler pipeline as separate stages. Every stage writes
// `<out>/<stage>.json` and a readable `<out>/<stage>.txt`, and reads the
// previous stage's artifact from the same directory.

#pragma once

#include "minicase/cost_model.hpp"
#include "minicase/error.hpp"
#include "minicase/sbp.hpp"
#include "minicase/tensor_ir.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace minicase {

struct PipelineConfig {
  /// JSON graph file, or the name of a bundled example.
  std::string graph;
  /// Hardware JSON file; empty selects the desk machine.
  std::string hw;
  /// Mesh such as "2" or "2x2"; empty uses the hardware's own mesh.
  std::string mesh;
  /// Comma-separated rule families ("transpose", "vectorize"); may be empty.
  std::string rules = "transpose,vectorize";
  /// "exact" (optimal DAG extraction), "greedy" (bottom-up tree cost) or
  /// "none" (keep the input graph).
  std::string extract = "exact";
  int levels = 3;
  int iters = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = "minicase_out";
  /// Optional microkernel table JSON for scheduling.
  std::string ukernels;
  /// Calibration samples CSV for the calibrate stage.
  std::string samples;
};

struct StageResult {
  std::string stage;
  nlohmann::json artifact;
  std::string report;
};

HardwareSpec pipeline_hardware(const PipelineConfig &c);
/// Throws Validation when the mesh needs more devices than the hardware has.
Placement pipeline_mesh(const PipelineConfig &c, const HardwareSpec &hw);
Graph pipeline_graph(const std::string &graph);

struct OptimizeOutcome {
  Graph graph;
  nlohmann::json stats;
};

/// Saturates with the named rule families and extracts under the Roofline
/// cost of `hw`.
OptimizeOutcome optimize_graph(const Graph &g, const HardwareSpec &hw, const std::string &rules,
                               const std::string &extract);

/// The unpacked MatMul, Unary and Binary nodes of `g` as a graph of their
/// own. Values flowing in from other nodes become inputs named after the
/// original input, or "n<id>" for computed values; `bindings` receives the
/// source node of every such input.
Graph schedulable_subgraph(const Graph &g, std::map<std::string, NodeId> *bindings = nullptr);

StageResult stage_optimize(const PipelineConfig &c);
StageResult stage_distribute(const PipelineConfig &c);
StageResult stage_schedule(const PipelineConfig &c);
StageResult stage_plan(const PipelineConfig &c);
/// Compares the raw, optimized, arena-planned, distributed and scheduled
/// executions on seeded random inputs; throws Internal on a mismatch after
/// writing the artifact.
StageResult stage_run(const PipelineConfig &c);
/// Concatenates the readable reports of every stage present in `out`.
StageResult stage_report(const PipelineConfig &c);
StageResult stage_calibrate(const PipelineConfig &c);

/// optimize, distribute, schedule, plan, run and report in order. The name
/// of the stage being executed is kept in `current` when given.
std::vector<StageResult> run_pipeline(const PipelineConfig &c, std::string *current = nullptr);

/// Process exit status for an error code: 2 validation, 3 infeasible,
/// 4 internal.
int exit_status(ErrorCode code);

} // namespace minicase
