// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Executes a tiled schedule loop by loop and counts the bytes every buffer
// copy moves between storage levels.

#pragma once

#include "minicase/interpreter.hpp"
#include "minicase/minlp.hpp"

#include <cstdint>
#include <vector>

namespace minicase {

struct ScheduledRun {
  /// Graph outputs in declaration order.
  std::vector<TensorValue> outputs;
  /// Bytes per storage level, counted per executed copy.
  std::vector<double> reads;
  std::vector<double> writes;
  /// Largest simultaneously live bytes per storage level.
  std::vector<std::int64_t> peak_live;

  /// Reads plus writes at every storage level above the innermost one,
  /// i.e. all bytes that cross out of the memory feeding the kernels.
  double outer_traffic() const;
  double total(int storage) const;
};

/// Runs the loop nest of `m.ttg` with the given tiles and copy chains.
/// A copy is charged when its position executes: reads move the region
/// into its storage level through every level up to the parent copy, write
/// copies are written back the same way and are refilled first when the
/// region already holds partial results. Throws CapacityViolation when the
/// live copies of one storage level exceed its capacity, and Validation
/// when the tiles do not cover the iteration spaces.
ScheduledRun eval_scheduled(const MinlpModel &m, const TileAssignment &tiles,
                            const std::vector<std::vector<BufferCopy>> &placement,
                            const TensorMap &inputs);

ScheduledRun eval_scheduled(const MinlpModel &m, const MinlpSolution &sol, const TensorMap &inputs);

} // namespace minicase
