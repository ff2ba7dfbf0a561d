// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive enumeration of distributed strategies for small graphs in which
// every compute result has at most one consumer.

#pragma once

#include "minicase/cost_model.hpp"
#include "minicase/tensor_ir.hpp"

namespace oracle {

using namespace minicase;

struct DistOracleResult {
  double cost = 0.0;
  std::size_t strategies = 0; // feasible signature assignments
  bool found = false;
};

/// Tries every assignment of one signature per compute node. Operand states
/// come from the producer's chosen state through the cheapest chain of
/// single-mesh-dim reshards among the producer's directly computable states,
/// optionally followed by one more such reshard. Inputs are free in any
/// non-Partial state. Outputs gather to the host from any computable state.
DistOracleResult exhaustive_distribution(const Graph &g, const Placement &placement,
                                         const HardwareSpec &hw);

} // namespace oracle
