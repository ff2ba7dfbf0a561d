// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Hardware description and the three cost models: roofline per operator,
// alpha-beta per collective, and a linear microkernel time model.

#pragma once

#include "minicase/boxing.hpp"
#include "minicase/extraction.hpp"
#include "minicase/tensor_ir.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace minicase {

enum class ComputeUnit { Scalar, Vector, Tensor };

const char *unit_name(ComputeUnit u);
ComputeUnit parse_unit(const std::string &text);

struct MemoryLevel {
  std::string name;
  std::int64_t capacity = 0; // bytes
  double bandwidth = 0.0;    // bytes per second
};

struct HardwareSpec {
  /// Ordered inner (fastest, smallest) to outer.
  std::vector<MemoryLevel> levels;
  std::map<ComputeUnit, double> peak_flops;
  double alpha = 0.0; // seconds
  double beta = 0.0;  // seconds per byte
  std::int64_t device_count = 1;
  Shape mesh;

  /// Three-level desk machine: L1 32 KiB, L2 1 MiB, DRAM.
  static HardwareSpec desk();
  static HardwareSpec from_json(const nlohmann::json &j);
  static HardwareSpec load(const std::string &path);
  nlohmann::json to_json() const;

  /// Throws Validation when capacities do not grow outward, bandwidths grow
  /// outward, or any rate is not positive.
  void validate() const;
  double outer_bandwidth() const { return levels.back().bandwidth; }
};

/// Unit that executes a node: tensor for 2-D-lane MatMul, vector for other
/// packed compute, scalar otherwise. Throws UnknownUnit for Boxing.
ComputeUnit compute_unit(const OpKind &kind, const std::vector<TensorType> &inputs,
                         const TensorType &output);

double node_flops(const OpKind &kind, const std::vector<TensorType> &inputs,
                  const TensorType &output);

/// max(flops / peak(unit), moved bytes / outermost bandwidth); Input and
/// Constant nodes cost nothing.
double roofline_cost(const OpKind &kind, const std::vector<TensorType> &inputs,
                     const TensorType &output, const HardwareSpec &hw);

/// Alpha-beta cost of one collective with ring wire volume.
double comm_cost(CollectiveKind kind, std::int64_t bytes, std::int64_t participants,
                 const HardwareSpec &hw);

struct UKernelEntry {
  double base = 0.0;        // seconds
  double per_element = 0.0; // seconds per element
};

/// Keyed by (operator name, unit); operator names follow op_name().
struct UKernelModel {
  std::map<std::pair<std::string, ComputeUnit>, UKernelEntry> entries;

  /// Flop-proportional defaults derived from the peaks of `hw`.
  static UKernelModel defaults(const HardwareSpec &hw);
  static UKernelModel from_json(const nlohmann::json &j);
  nlohmann::json to_json() const;
};

/// base + per_element * tile_elems. Throws MissingEntry.
double ukernel_time(const OpKind &kind, ComputeUnit unit, std::int64_t tile_elems,
                    const UKernelModel &model);

/// Work units for one kernel tile: 2*m*n*k for MatMul, element count otherwise.
std::int64_t tile_work(const OpKind &kind, const Shape &tile);

struct CalibrationSample {
  std::string kind;
  ComputeUnit unit = ComputeUnit::Scalar;
  double elems = 0.0;
  double seconds = 0.0;
};

/// Parses `kind,unit,elems,seconds` rows; a header row is skipped.
std::vector<CalibrationSample> parse_calibration_csv(const std::string &text);

/// Least-squares line per (kind, unit). Throws Validation when a group has
/// fewer than two distinct sizes or a non-positive slope.
UKernelModel calibrate(const std::vector<CalibrationSample> &samples);

/// Roofline cost of e-nodes using their classes' types.
NodeCostFn roofline_node_cost(const HardwareSpec &hw);

} // namespace minicase
