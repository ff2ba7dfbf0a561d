// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Distributed strategy search: SBP signatures, the distributed e-graph with
// Boxing reshards, and memory-aware extraction of one strategy.

#pragma once

#include "minicase/cost_model.hpp"
#include "minicase/egraph.hpp"
#include "minicase/extraction.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

/// One valid (inputs -> output) combination, per mesh dim or per placement.
struct DimSignature {
  std::vector<Sbp> inputs;
  Sbp output;
};

struct NdSignature {
  std::vector<NdSbp> inputs;
  NdSbp output;
};

/// Valid signatures of `kind` on a single mesh dimension.
std::vector<DimSignature> dim_signatures(const OpKind &kind,
                                         const std::vector<TensorType> &inputs);

/// Cartesian product of the per-dim tables, keeping only combinations whose
/// operands and result shard evenly. Mesh dims of size 1 only admit
/// Broadcast.
std::vector<NdSignature> signatures(const OpKind &kind, const std::vector<TensorType> &inputs,
                                    const Placement &placement);

/// Every non-Partial NdSbp under which `type` shards evenly.
std::vector<NdSbp> input_candidates(const TensorType &type, const Placement &placement);

/// Logical node id -> (NdSbp -> e-class) for states produced directly.
using ECluster = std::map<NodeId, std::map<NdSbp, EClassId>>;

struct DistEGraph {
  EGraph egraph;
  ECluster cluster;
  /// States reached only through a reshard Boxing, per logical node.
  ECluster reshard;
  /// Host-resident classes of the graph inputs.
  std::map<NodeId, EClassId> host;
  /// Host class of each graph output, in output order.
  std::vector<EClassId> roots;
  Placement placement;
};

/// Builds the search space: inputs get one shard Boxing per candidate,
/// compute nodes expand over every signature whose operand states exist
/// (after one-collective reshards), and outputs gather back to the host.
/// Throws NoStrategy when a node admits no signature.
DistEGraph build_dist_egraph(const Graph &g, const Placement &placement);

/// Sum of comm_cost over the collectives of one Boxing.
double boxing_cost(const TensorType &type, const std::optional<NdSbp> &src,
                   const std::optional<NdSbp> &dst, const Placement &placement,
                   const HardwareSpec &hw);

/// Roofline on per-device shards for compute nodes, boxing_cost for Boxing.
NodeCostFn dist_node_cost(const HardwareSpec &hw, const Placement &placement);

struct MemoryReport {
  std::vector<std::int64_t> device_peak;
  std::int64_t cluster_sum = 0;
  std::int64_t capacity = 0;
  bool fits = true;
};

/// Per-device liveness peak of shard buffers against `capacity` (the
/// outermost level of `hw` when not given).
MemoryReport memory_check(const Graph &dg, const Placement &placement, const HardwareSpec &hw,
                          std::optional<std::int64_t> capacity = std::nullopt);

struct DistributionResult {
  Graph graph;
  double cost = 0.0;
  MemoryReport memory;
  std::size_t classes = 0;
  std::size_t nodes = 0;
};

/// Builds the distributed e-graph and extracts the cheapest strategy that
/// fits per-device memory.
DistributionResult distribute(const Graph &g, const Placement &placement, const HardwareSpec &hw,
                              std::optional<std::int64_t> capacity = std::nullopt);

/// Per-node strategy table for reports.
std::string strategy_table(const Graph &dg, const Placement &placement, const HardwareSpec &hw);

} // namespace minicase
