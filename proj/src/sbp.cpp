// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/sbp.hpp"

#include "minicase/error.hpp"

#include <sstream>

namespace minicase {

const char *error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::ArityMismatch: return "ArityMismatch";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::IndivisiblePack: return "IndivisiblePack";
  case ErrorCode::TypeError: return "TypeError";
  case ErrorCode::TypeMismatch: return "TypeMismatch";
  case ErrorCode::UnknownUnit: return "UnknownUnit";
  case ErrorCode::MissingEntry: return "MissingEntry";
  case ErrorCode::Infeasible: return "Infeasible";
  case ErrorCode::NoStrategy: return "NoStrategy";
  case ErrorCode::IllegalMerge: return "IllegalMerge";
  case ErrorCode::BadPermutation: return "BadPermutation";
  case ErrorCode::MissingInput: return "MissingInput";
  case ErrorCode::ShardMismatch: return "ShardMismatch";
  case ErrorCode::CapacityViolation: return "CapacityViolation";
  case ErrorCode::Validation: return "Validation";
  case ErrorCode::Parse: return "Parse";
  case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

std::string Sbp::to_string() const {
  switch (kind) {
  case Kind::Split: return "S" + std::to_string(axis);
  case Kind::Broadcast: return "B";
  case Kind::Partial: return "P";
  }
  return "?";
}

Sbp Sbp::parse(const std::string &text) {
  if (text == "B")
    return broadcast();
  if (text == "P")
    return partial();
  if (text.size() >= 2 && text[0] == 'S') {
    try {
      return split(std::stoi(text.substr(1)));
    } catch (const std::exception &) {
    }
  }
  throw Error(ErrorCode::Parse, "bad sbp '" + text + "'");
}

std::int64_t Placement::device_count() const {
  std::int64_t n = 1;
  for (auto d : dims)
    n *= d;
  return n;
}

std::vector<std::int64_t> Placement::coords(std::int64_t device) const {
  std::vector<std::int64_t> c(dims.size());
  for (std::size_t i = dims.size(); i-- > 0;) {
    c[i] = device % dims[i];
    device /= dims[i];
  }
  return c;
}

std::int64_t Placement::device_at(const std::vector<std::int64_t> &c) const {
  std::int64_t id = 0;
  for (std::size_t i = 0; i < dims.size(); ++i)
    id = id * dims[i] + c[i];
  return id;
}

std::string Placement::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i)
    os << (i ? "x" : "") << dims[i];
  return os.str();
}

Placement Placement::parse(const std::string &text) {
  Placement p;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::int64_t v = 0;
    try {
      v = std::stoll(part);
    } catch (const std::exception &) {
      throw Error(ErrorCode::Parse, "bad mesh '" + text + "'");
    }
    if (v < 1)
      throw Error(ErrorCode::Parse, "mesh dims must be positive: " + text);
    p.dims.push_back(v);
  }
  if (p.dims.empty())
    throw Error(ErrorCode::Parse, "empty mesh");
  return p;
}

bool NdSbp::has_partial() const {
  for (const auto &e : entries)
    if (e.is_partial())
      return true;
  return false;
}

bool NdSbp::all_broadcast() const {
  for (const auto &e : entries)
    if (!e.is_broadcast())
      return false;
  return true;
}

std::string NdSbp::to_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < entries.size(); ++i)
    s += (i ? "," : "") + entries[i].to_string();
  return s + "]";
}

NdSbp NdSbp::broadcast(std::size_t rank) {
  return NdSbp{std::vector<Sbp>(rank, Sbp::broadcast())};
}

bool shard_divisible(const std::vector<std::int64_t> &shape, const NdSbp &sbp,
                     const Placement &placement) {
  if (sbp.size() != placement.rank())
    return false;
  std::vector<std::int64_t> factor(shape.size(), 1);
  for (std::size_t d = 0; d < sbp.size(); ++d) {
    if (!sbp[d].is_split())
      continue;
    auto axis = sbp[d].axis;
    if (axis < 0 || static_cast<std::size_t>(axis) >= shape.size())
      return false;
    factor[axis] *= placement.dims[d];
  }
  for (std::size_t a = 0; a < shape.size(); ++a)
    if (shape[a] % factor[a] != 0)
      return false;
  return true;
}

std::vector<std::int64_t> shard_shape(const std::vector<std::int64_t> &shape,
                                      const NdSbp &sbp,
                                      const Placement &placement) {
  if (!shard_divisible(shape, sbp, placement))
    throw Error(ErrorCode::ShardMismatch,
                sbp.to_string() + " does not evenly split the tensor on mesh " +
                    placement.to_string());
  auto out = shape;
  for (std::size_t d = 0; d < sbp.size(); ++d)
    if (sbp[d].is_split())
      out[sbp[d].axis] /= placement.dims[d];
  return out;
}

} // namespace minicase
