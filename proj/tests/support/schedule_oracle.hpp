// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive enumeration of the states reachable from a tiered tile graph,
// each scored by the tiling solver.

#pragma once

#include "minicase/minlp.hpp"

#include <string>

namespace oracle {

using namespace minicase;

struct ExhaustiveSchedule {
  std::size_t states = 0;
  int max_depth = 0; // shortest-path depth of the farthest state
  double best_objective = 0.0;
  std::string best_key;
  double root_objective = 0.0;
};

/// Breadth-first search over every legal action until no new state appears.
/// Throws Validation when more than `state_limit` states are reachable.
ExhaustiveSchedule exhaustive_schedule(const TieredTileGraph &root, const HardwareSpec &hw,
                                       const UKernelModel &ukernels, std::size_t state_limit = 200);

} // namespace oracle
