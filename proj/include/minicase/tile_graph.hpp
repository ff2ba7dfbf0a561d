// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Tiered tile graphs: per memory level, tile nodes with an ordered loop set
// and topologically sorted children one level down. Loops carry global
// iteration variables, so the relation between a node and its parent is the
// identity on shared variables.

#pragma once

#include "minicase/tensor_ir.hpp"

#include <map>
#include <string>
#include <vector>

namespace minicase {

/// One compute operator of the scheduled subgraph.
struct TileOp {
  NodeId node = 0;
  OpKind kind;
  /// Iteration variables in default loop order (MatMul: m, k, n).
  std::vector<int> vars;
  /// Variable of every axis of every operand, and of the result.
  std::vector<std::vector<int>> operand_axes;
  std::vector<int> out_axes;
  std::vector<NodeId> inputs;

  /// Variables that are iterated but absent from the result.
  std::vector<int> reduction_vars() const;
  bool uses(int var) const;
};

struct TileNode {
  int id = 0; // index of the representative operator
  int level = 0;
  std::vector<int> loops;
  /// Ids of level-1 nodes in topological order; empty at level 0.
  std::vector<int> children;
};

struct TieredTileGraph {
  Graph graph;
  std::vector<TileOp> ops;
  std::vector<std::string> var_names;
  std::vector<std::int64_t> var_extent;
  int num_levels = 0;
  /// levels[n] maps node id to node.
  std::vector<std::map<int, TileNode>> levels;

  int top() const { return num_levels - 1; }
  /// Id of the node at `level` whose subtree holds operator `op`.
  int node_of(int op, int level) const;
  const TileNode &node(int level, int id) const { return levels.at(level).at(id); }
  /// Operators inside the subtree of a node.
  std::vector<int> ops_under(int level, int id) const;
  /// For each loop of the child, the index of the same variable among the
  /// parent's loops, or -1 when the parent does not iterate it.
  std::vector<int> relation(int level, int id) const;
  /// Operator index producing graph node `n`, or -1 for inputs.
  int producer_of(NodeId n) const;

  /// Level listing in the tile-centric notation, outermost level last.
  std::string to_string() const;
  /// Canonical text used for hashing and equality of states.
  std::string key() const;
};

/// Builds the unfused tiered graph: one node per operator per level, with
/// the full iteration space as its loop set. Accepts MatMul, Unary and
/// Binary operators on unpacked tensors; throws Validation otherwise.
TieredTileGraph init_tile_graph(const Graph &subgraph, int num_levels);

/// Fuses node `src` into node `dst` at `level`: src's children join dst's
/// children and src's node disappears. The nodes must already share every
/// level above, src must feed dst directly, the node graph must stay
/// acyclic, and no loop of dst may split a reduction whose result is
/// consumed inside the fused node. Throws IllegalMerge.
TieredTileGraph merge(const TieredTileGraph &s, int src, int dst, int level);

/// Replaces the loop order of node `id` at `level`. Throws BadPermutation.
TieredTileGraph reorder(const TieredTileGraph &s, int id, int level, const std::vector<int> &loops);

struct ScheduleAction {
  enum class Kind { Merge, Reorder };
  Kind kind = Kind::Merge;
  int src = 0, dst = 0, level = 0; // merge
  int node = 0;                    // reorder (level shared with merge)
  std::vector<int> loops;

  std::string to_string() const;
};

TieredTileGraph apply_action(const TieredTileGraph &s, const ScheduleAction &a);

/// Every legal merge along a dependency edge plus every non-identity loop
/// permutation of nodes with at most `max_reorder_loops` loops, keeping the
/// first action for each distinct resulting state.
std::vector<ScheduleAction> legal_actions(const TieredTileGraph &s, std::size_t max_reorder_loops = 4);

} // namespace minicase
