// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Bufferization: alias analysis, interval liveness and arena offset
// assignment.

#pragma once

#include "minicase/interpreter.hpp"
#include "minicase/tensor_ir.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

struct AliasInfo {
  /// Node whose storage is reused.
  NodeId source = 0;
  /// Byte offset of the view inside the source buffer.
  std::int64_t byte_offset = 0;
};

/// View-producing nodes that can share their input's storage: every Reshape,
/// and Slices that select a contiguous row-major range.
std::map<NodeId, AliasInfo> alias_analysis(const Graph &g);

/// True when the slice [begins, ends) of `shape` is one contiguous range.
bool slice_is_contiguous(const Shape &shape, const Shape &begins, const Shape &ends);

struct BufferRecord {
  std::int64_t id = 0;
  std::int64_t size = 0;
  /// Inclusive interval over positions in the topological order.
  std::int64_t first = 0;
  std::int64_t last = 0;
  std::optional<std::int64_t> alias_of;
  std::int64_t alias_offset = 0;
  bool pinned = false;
};

/// One record per node, in node order. Sizes are per-device shard bytes when
/// `placement` is given and the node carries an NdSbp; host-side nodes then
/// get size 0. Graph outputs stay live to the end, constants are pinned for
/// the whole program, and an alias extends its root's interval.
std::vector<BufferRecord> liveness(const Graph &g,
                                   const std::optional<Placement> &placement = std::nullopt);

/// Largest sum of live non-alias buffer sizes at any position.
std::int64_t peak_live_bytes(const std::vector<BufferRecord> &buffers,
                             std::int64_t alignment = 1);
std::int64_t peak_live_bytes(const Graph &g,
                             const std::optional<Placement> &placement = std::nullopt);

enum class PlanMode { Exact, FirstFit, Auto };

struct MemoryPlan {
  std::map<std::int64_t, std::int64_t> offsets;
  std::int64_t footprint = 0;
  /// False when Auto fell back to first fit.
  bool optimal = false;
};

/// Buffers with more members than this are planned with first fit in Auto mode.
inline constexpr std::size_t kExactPlanLimit = 12;

MemoryPlan plan(const std::vector<BufferRecord> &buffers, PlanMode mode,
                std::int64_t alignment = 64);

/// True when no two interfering non-alias buffers overlap in [offset, offset+size).
bool plan_is_valid(const std::vector<BufferRecord> &buffers, const MemoryPlan &p,
                   std::int64_t alignment = 64);

/// Offsets for eval_in_arena: aliases resolve into their root's storage.
ArenaLayout arena_layout(const std::vector<BufferRecord> &buffers, const MemoryPlan &p);

struct ConstantRegion {
  NodeId node = 0;
  std::int64_t offset = 0;
  std::int64_t bytes = 0;
};

struct ConstantLayout {
  /// Pinned regions per device.
  std::vector<std::vector<ConstantRegion>> devices;
  std::vector<std::int64_t> device_bytes;
};

/// Pins each constant's per-device shard. Throws ShardMismatch for Partial
/// constants.
ConstantLayout plan_constants(const Graph &dg, const Placement &placement,
                              std::int64_t alignment = 64);

std::string plan_report(const std::vector<BufferRecord> &buffers, const MemoryPlan &p);

} // namespace minicase
