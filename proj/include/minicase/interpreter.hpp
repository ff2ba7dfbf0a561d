// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense reference executor. Every transformation in the compiler is checked
// against these semantics.

#pragma once

#include "minicase/boxing.hpp"
#include "minicase/tensor_ir.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace minicase {

/// Row-major payload for a TensorType; packed tensors are laid out as
/// shape followed by lanes.
struct TensorValue {
  TensorType type;
  std::vector<float> data;

  TensorValue() = default;
  TensorValue(TensorType t, std::vector<float> d);
  static TensorValue zeros(const TensorType &t);
  static TensorValue random(const TensorType &t, std::mt19937_64 &rng,
                            float lo = -1.0f, float hi = 1.0f);
};

using TensorMap = std::map<std::string, TensorValue>;

/// Executes one operator on concrete operands.
TensorValue apply_op(const OpKind &kind, const std::vector<TensorValue> &inputs);

/// Values of every node, indexed by node id. Inputs are bound by name.
std::vector<TensorValue> eval_all(const Graph &g, const TensorMap &inputs);
/// Values of the graph outputs, in declaration order.
std::vector<TensorValue> eval(const Graph &g, const TensorMap &inputs);

/// Random values for every declared input of `g`.
TensorMap random_inputs(const Graph &g, std::mt19937_64 &rng);

/// Largest |a-b| / max(1, |b|) over all elements; infinity on type mismatch.
double max_relative_error(const TensorValue &a, const TensorValue &b);

struct TrafficCounters {
  /// Wire bytes per participant, summed over executed collectives.
  std::map<CollectiveKind, double> wire_bytes;
  std::int64_t collectives = 0;

  double total() const;
};

struct DistributedResult {
  std::vector<TensorValue> outputs;
  TrafficCounters traffic;
};

/// Simulates every device of `placement` executing the distributed graph in
/// device-id order. Nodes carry their output NdSbp; Boxing nodes are lowered
/// with lower_boxing and executed functionally.
DistributedResult eval_distributed(const Graph &dg, const Placement &placement,
                                   const TensorMap &inputs);

/// Byte offsets of node outputs inside one flat arena. Aliased nodes point
/// into their root's storage.
struct ArenaLayout {
  std::int64_t size_bytes = 0;
  std::map<NodeId, std::int64_t> offsets;
};

/// Executes `g` with every intermediate stored in a single arena at the given
/// offsets; node outputs missing from the layout get private storage.
std::vector<TensorValue> eval_in_arena(const Graph &g, const TensorMap &inputs,
                                       const ArenaLayout &layout);

} // namespace minicase
