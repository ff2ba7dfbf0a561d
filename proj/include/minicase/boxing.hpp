// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Lowering of a Boxing (reshard) into per-mesh-dimension collectives.

#pragma once

#include "minicase/sbp.hpp"
#include "minicase/tensor_ir.hpp"

#include <optional>
#include <string>
#include <vector>

namespace minicase {

enum class CollectiveKind : std::uint8_t {
  AllReduce,
  AllGather,
  Scatter,
  SliceLocal,
  AllToAll,
};

const char *collective_name(CollectiveKind kind);

struct CollectiveStep {
  CollectiveKind kind;
  std::size_t mesh_dim;
  Sbp from;
  Sbp to;
  /// Per-device payload: the local buffer for AllReduce/AllToAll, the
  /// gathered buffer for AllGather, zero for SliceLocal.
  std::int64_t payload_bytes;
  std::int64_t participants;
};

/// Collective sequence converting `src` to `dst` for a tensor of logical type
/// `type`. A missing NdSbp denotes the host, which behaves as all-Broadcast.
/// Gathers run inner-to-outer, slices outer-to-inner so nested splits of one
/// axis keep their block order.
std::vector<CollectiveStep> lower_boxing(const TensorType &type,
                                         const std::optional<NdSbp> &src,
                                         const std::optional<NdSbp> &dst,
                                         const Placement &placement);

} // namespace minicase
