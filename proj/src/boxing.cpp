// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/boxing.hpp"

#include "minicase/error.hpp"

namespace minicase {

const char *collective_name(CollectiveKind kind) {
  switch (kind) {
  case CollectiveKind::AllReduce: return "AllReduce";
  case CollectiveKind::AllGather: return "AllGather";
  case CollectiveKind::Scatter: return "Scatter";
  case CollectiveKind::SliceLocal: return "SliceLocal";
  case CollectiveKind::AllToAll: return "AllToAll";
  }
  return "?";
}

namespace {

std::int64_t local_bytes(const TensorType &type, const NdSbp &state,
                         const Placement &placement) {
  auto shard = shard_shape(type.shape, state, placement);
  return product(shard) * product(type.lanes) *
         static_cast<std::int64_t>(byte_width(type.dtype));
}

bool splits_axis(const Sbp &s, int axis) { return s.is_split() && s.axis == axis; }

} // namespace

std::vector<CollectiveStep> lower_boxing(const TensorType &type,
                                         const std::optional<NdSbp> &src_opt,
                                         const std::optional<NdSbp> &dst_opt,
                                         const Placement &placement) {
  const auto rank = placement.rank();
  NdSbp src = src_opt ? *src_opt : NdSbp::broadcast(rank);
  NdSbp dst = dst_opt ? *dst_opt : NdSbp::broadcast(rank);
  if (src.size() != rank || dst.size() != rank)
    throw Error(ErrorCode::ShardMismatch, "sbp rank differs from the placement rank");
  for (std::size_t d = 0; d < rank; ++d)
    if (dst[d].is_partial() && !(src[d] == dst[d]))
      throw Error(ErrorCode::ShardMismatch, "cannot reshard into Partial");
  if (!shard_divisible(type.shape, src, placement) ||
      !shard_divisible(type.shape, dst, placement))
    throw Error(ErrorCode::ShardMismatch, "boxing endpoints do not divide the tensor");

  std::vector<CollectiveStep> steps;
  if (src == dst)
    return steps;

  // A dim changing from S(i) to S(j) lowers to one AllToAll when no other
  // dim touches either axis.
  std::vector<bool> all_to_all(rank, false);
  for (std::size_t d = 0; d < rank; ++d) {
    if (!(src[d].is_split() && dst[d].is_split() && src[d].axis != dst[d].axis))
      continue;
    bool clean = true;
    for (std::size_t o = 0; o < rank; ++o) {
      if (o == d)
        continue;
      for (int axis : {src[d].axis, dst[d].axis})
        if (splits_axis(src[o], axis) || splits_axis(dst[o], axis))
          clean = false;
    }
    all_to_all[d] = clean;
  }

  // Dims that must pass through Broadcast: every changing dim not handled by
  // AllToAll, plus inner dims splitting an axis that an outer change touches.
  std::vector<bool> lift(rank, false);
  for (std::size_t d = 0; d < rank; ++d)
    lift[d] = !(src[d] == dst[d]) && !all_to_all[d];
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t d = 0; d < rank; ++d) {
      if (!lift[d])
        continue;
      for (const auto &s : {src[d], dst[d]}) {
        if (!s.is_split())
          continue;
        for (std::size_t inner = d + 1; inner < rank; ++inner)
          if (!lift[inner] && splits_axis(src[inner], s.axis)) {
            lift[inner] = true;
            changed = true;
          }
      }
    }
  }

  NdSbp cur = src;
  for (std::size_t d = rank; d-- > 0;) {
    if (!lift[d] || cur[d].is_broadcast())
      continue;
    NdSbp next = cur;
    next[d] = Sbp::broadcast();
    if (cur[d].is_partial())
      steps.push_back({CollectiveKind::AllReduce, d, cur[d], next[d],
                       local_bytes(type, cur, placement), placement.dims[d]});
    else
      steps.push_back({CollectiveKind::AllGather, d, cur[d], next[d],
                       local_bytes(type, next, placement), placement.dims[d]});
    cur = next;
  }
  for (std::size_t d = 0; d < rank; ++d) {
    if (cur[d] == dst[d])
      continue;
    NdSbp next = cur;
    next[d] = dst[d];
    if (all_to_all[d]) {
      steps.push_back({CollectiveKind::AllToAll, d, cur[d], dst[d],
                       local_bytes(type, cur, placement), placement.dims[d]});
    } else {
      if (!cur[d].is_broadcast())
        throw Error(ErrorCode::Internal, "boxing lowering left a non-broadcast dim");
      steps.push_back({CollectiveKind::SliceLocal, d, cur[d], dst[d], 0,
                       placement.dims[d]});
    }
    cur = next;
  }
  return steps;
}

} // namespace minicase
