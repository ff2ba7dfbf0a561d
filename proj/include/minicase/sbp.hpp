// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Distributed tensor state: per-mesh-dimension Split/Broadcast/Partial.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace minicase {

struct Sbp {
  enum class Kind : std::uint8_t { Split, Broadcast, Partial };

  Kind kind = Kind::Broadcast;
  int axis = 0; // only meaningful for Split

  static Sbp split(int axis) { return {Kind::Split, axis}; }
  static Sbp broadcast() { return {Kind::Broadcast, 0}; }
  static Sbp partial() { return {Kind::Partial, 0}; }

  bool is_split() const { return kind == Kind::Split; }
  bool is_broadcast() const { return kind == Kind::Broadcast; }
  bool is_partial() const { return kind == Kind::Partial; }

  friend bool operator==(const Sbp &a, const Sbp &b) {
    return a.kind == b.kind && (a.kind != Kind::Split || a.axis == b.axis);
  }
  friend bool operator<(const Sbp &a, const Sbp &b) {
    if (a.kind != b.kind)
      return a.kind < b.kind;
    return a.kind == Kind::Split && a.axis < b.axis;
  }

  std::string to_string() const;
  static Sbp parse(const std::string &text);
};

/// Logical device mesh. The product of dims is the device count.
struct Placement {
  std::vector<std::int64_t> dims;

  std::int64_t device_count() const;
  std::size_t rank() const { return dims.size(); }
  /// Row-major coordinates of a device id.
  std::vector<std::int64_t> coords(std::int64_t device) const;
  std::int64_t device_at(const std::vector<std::int64_t> &coords) const;

  friend bool operator==(const Placement &, const Placement &) = default;
  std::string to_string() const; // "2x2"
  static Placement parse(const std::string &text);
};

/// One Sbp entry per placement dimension.
struct NdSbp {
  std::vector<Sbp> entries;

  std::size_t size() const { return entries.size(); }
  const Sbp &operator[](std::size_t i) const { return entries[i]; }
  Sbp &operator[](std::size_t i) { return entries[i]; }

  bool has_partial() const;
  bool all_broadcast() const;

  friend bool operator==(const NdSbp &a, const NdSbp &b) {
    return a.entries == b.entries;
  }
  friend bool operator<(const NdSbp &a, const NdSbp &b) {
    return a.entries < b.entries;
  }

  std::string to_string() const; // "[S0,B]"
  static NdSbp broadcast(std::size_t rank);
};

/// True when every split axis divides evenly by the product of the mesh dims
/// splitting it.
bool shard_divisible(const std::vector<std::int64_t> &shape,
                     const NdSbp &sbp, const Placement &placement);
/// Per-device shard shape; throws ShardMismatch when not divisible.
std::vector<std::int64_t> shard_shape(const std::vector<std::int64_t> &shape,
                                      const NdSbp &sbp,
                                      const Placement &placement);

} // namespace minicase
