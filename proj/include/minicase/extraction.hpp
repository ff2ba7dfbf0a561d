// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exact DAG-cost extraction from an e-graph by branch and bound.

#pragma once

#include "minicase/egraph.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

using NodeCostFn = std::function<double(const EGraph &, EClassId, const ENode &)>;
/// Chosen node per class.
using Selection = std::map<EClassId, ENode>;

struct ExtractionProblem {
  const EGraph *egraph = nullptr;
  std::vector<EClassId> roots;
  NodeCostFn cost;
  /// Per-device bytes; checked with the liveness peak of the extracted graph.
  std::optional<std::int64_t> memory_limit;
  /// Used for shard sizes in the memory check and copied into the result.
  std::optional<Placement> placement;
  /// Search nodes visited before giving up on proving optimality.
  std::size_t node_budget = 20'000'000;
};

struct ExtractionResult {
  Graph graph;
  double cost = 0.0;
  Selection selection;
  bool optimal = true;
  std::size_t nodes_visited = 0;
};

/// Minimum DAG-cost selection (every chosen class paid once). Throws
/// Infeasible when no acyclic selection exists or none fits the memory limit.
ExtractionResult extract(const ExtractionProblem &p);

/// Builds the term graph of `sel` reachable from `roots` in depth-first post
/// order. Input nodes become graph inputs and the roots become outputs.
/// Throws Infeasible on a cycle or a missing class.
Graph selection_to_graph(const EGraph &g, const Selection &sel,
                         const std::vector<EClassId> &roots);

/// Sum of node costs over classes reachable from `roots`, in ascending class id.
double selection_cost(const EGraph &g, const Selection &sel, const std::vector<EClassId> &roots,
                      const NodeCostFn &cost);

/// Bottom-up tree-cost choice per class (each class's cheapest node given its
/// children's best tree costs). Classes with no finite tree are absent.
Selection tree_cost_selection(const EGraph &g, const NodeCostFn &cost);

/// Pseudo-boolean (OPB) encoding of the extraction: one variable per e-node,
/// root and child-closure constraints, and the cost objective with costs
/// scaled to integers by `scale`.
std::string pseudo_boolean_encoding(const ExtractionProblem &p, double scale = 1e9);

/// Destructive baseline: applies the named rules to the graph in order.
Graph greedy_extract(const Graph &g, const std::vector<std::string> &order);

/// Cost functions used by the optimizer.
NodeCostFn unit_transpose_cost();

} // namespace minicase
