// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Tile-size and buffer-placement model for one tiered tile graph, and an
// exact branch-and-bound solver over divisor tile sizes.
//
// Conventions shared by the model, the solver and the scheduled interpreter:
//  * Tile level n (1..top) gives every loop of a node one trip count
//    TileVar; level 0 has no loops. A variable missing from every loop of an
//    operator's chain is executed whole inside the microkernel.
//  * A microkernel call executes one level-1 tile of one operator.
//  * A placement position is (level, entry): entry e of a level-n node sits
//    just inside its first e loops, so the copy covers loops e.. of that
//    level and everything below. Position (0, 0) sits inside all loops.
//  * Storage level s maps to hardware level s, except that the top tile
//    level always maps to the outermost hardware level.
//  * A copy at storage s refilled from a parent copy at storage p moves
//    Size * Trip bytes through every storage level in (s, p].

#pragma once

#include "minicase/cost_model.hpp"
#include "minicase/tile_graph.hpp"

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

struct TileKey {
  int level = 0;
  int node = 0;
  int var = 0;
  friend auto operator<=>(const TileKey &, const TileKey &) = default;
};

using TileAssignment = std::map<TileKey, std::int64_t>;

struct BufferCopy {
  int level = 0;   // creation level
  int entry = 0;   // creation entry within that level's node
  int storage = 0; // storage level, never above `level`
  friend bool operator==(const BufferCopy &, const BufferCopy &) = default;
};

struct ScheduleBuffer {
  std::string name;
  NodeId tensor = 0;
  /// Operator whose loop chain defines the positions of the copies.
  int owner = 0;
  /// Operand index in the owner, or -1 for its result.
  int operand = -1;
  /// Operators that touch this buffer.
  std::vector<int> ops;
  bool write = false;
  /// Intermediate kept inside a fused node instead of outer memory.
  bool fused = false;
  int fusion_level = 0;
  std::vector<int> axes; // iteration variable per tensor axis
  std::int64_t elem_bytes = 4;
};

struct MinlpModel {
  TieredTileGraph ttg;
  HardwareSpec hw;
  UKernelModel ukernels;
  std::vector<TileKey> tile_vars;
  std::vector<std::vector<std::int64_t>> domains;
  std::vector<ScheduleBuffer> buffers;
  /// Per buffer, every legal copy chain ordered outer to inner. Private
  /// buffers start with their full-tensor copy in the outermost memory.
  std::vector<std::vector<std::vector<BufferCopy>>> options;
  /// Hardware level index of every storage level.
  std::vector<std::size_t> mem_level;
  std::vector<ComputeUnit> units; // per operator
  /// Readable listing of the constraint families.
  std::vector<std::string> constraints;

  int top() const { return ttg.top(); }
  std::int64_t capacity(int storage) const;
  double bandwidth(int storage) const;
};

/// Derived quantities for one tile assignment.
class TileExtents {
public:
  TileExtents(const TieredTileGraph &ttg, const TileAssignment &tiles);

  /// Number of entries of the node holding `op` at `level` (1 at level 0).
  int entries(int op, int level) const;
  /// Tile extent of `var` for `op` at `level`, below all of its loops.
  std::int64_t extent(int op, int level, int var) const;
  /// Extent of `var` covered by a copy created at (level, entry).
  std::int64_t extent_at(int op, int level, int entry, int var) const;
  /// Executions of position (level, entry).
  std::int64_t trip(int op, int level, int entry) const;
  std::int64_t tile(int level, int node, int var) const;
  /// True when every operator's variables are covered exactly.
  bool covers() const;

private:
  int node(int op, int level) const { return nodes_[static_cast<std::size_t>(op)][static_cast<std::size_t>(level)]; }
  const std::vector<int> &loops(int op, int level) const {
    return *loops_[static_cast<std::size_t>(op)][static_cast<std::size_t>(level)];
  }

  const TieredTileGraph *ttg_;
  const TileAssignment *tiles_;
  // Per operator and level: enclosing node id and its loop list.
  std::vector<std::vector<int>> nodes_;
  std::vector<std::vector<const std::vector<int> *>> loops_;
};

struct ScheduleCost {
  double t_comp = 0.0;
  double t_mem = 0.0;
  double objective = 0.0;
  std::vector<double> reads;  // bytes per storage level
  std::vector<double> writes; // bytes per storage level
  std::vector<std::int64_t> used; // bytes per storage level
  bool fits = true;
};

struct MinlpSolution {
  TileAssignment tiles;
  std::vector<std::vector<BufferCopy>> placement; // per buffer
  ScheduleCost cost;
  double objective = 0.0;
  bool optimal = true;
  std::int64_t explored = 0;

  std::string table(const MinlpModel &m) const;
  nlohmann::json to_json(const MinlpModel &m) const;
};

struct SolveOptions {
  /// Restricts tile variables to the given values.
  std::optional<TileAssignment> fixed_tiles;
  /// Tile assignments to examine before giving up optimality.
  std::int64_t node_limit = 5'000'000;
};

/// Variables, domains, placement options and constraint listing. Throws
/// Validation when the tile graph has more levels than the hardware.
MinlpModel build_model(const TieredTileGraph &ttg, const HardwareSpec &hw,
                       const UKernelModel &ukernels);

/// Cost of a concrete assignment, or nullopt when the tiles do not cover
/// the iteration spaces. Capacity overflow is reported through `fits`.
std::optional<ScheduleCost> evaluate_schedule(const MinlpModel &m, const TileAssignment &tiles,
                                              const std::vector<std::vector<BufferCopy>> &placement);

/// Minimises max(T_mem, T_comp). Ties keep the first assignment in
/// enumeration order. Throws Infeasible when nothing fits.
MinlpSolution solve(const MinlpModel &m, const SolveOptions &opts = {});

/// Convenience: fixes every tiled level except the top one (which takes the
/// remaining factor) from per-level trip counts given in an operator's loop
/// variable order. Only meaningful for single-operator graphs.
TileAssignment single_op_tiles(const TieredTileGraph &ttg, const std::vector<std::vector<std::int64_t>> &per_level);

} // namespace minicase
