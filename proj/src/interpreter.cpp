// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/interpreter.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace minicase {

namespace {

Shape strides_of(const Shape &shape) {
  Shape s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;)
    s[i - 1] = s[i] * shape[i];
  return s;
}

// Calls fn(index) for every multi-index of `shape` in row-major order.
template <typename Fn> void for_each_index(const Shape &shape, Fn &&fn) {
  if (product(shape) == 0)
    return;
  Shape idx(shape.size(), 0);
  while (true) {
    fn(idx);
    std::size_t d = shape.size();
    while (d > 0) {
      --d;
      if (++idx[d] < shape[d])
        break;
      idx[d] = 0;
      if (d == 0)
        return;
    }
    if (shape.empty())
      return;
  }
}

std::int64_t offset_of(const Shape &idx, const Shape &strides) {
  std::int64_t off = 0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    off += idx[i] * strides[i];
  return off;
}

void round_if_half(TensorValue &v) {
  if (v.type.dtype == DataType::F16)
    for (auto &x : v.data)
      x = round_to_f16(x);
}

TensorValue matmul(const TensorValue &a, const TensorValue &b, const TensorType &out_t) {
  TensorValue out = TensorValue::zeros(out_t);
  const auto &as = a.type.shape;
  const auto &bs = b.type.shape;
  if (!a.type.is_packed() && !b.type.is_packed()) {
    auto M = as[0], K = as[1], N = bs[1];
    for (std::int64_t m = 0; m < M; ++m)
      for (std::int64_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (std::int64_t k = 0; k < K; ++k)
          acc += static_cast<double>(a.data[m * K + k]) * b.data[k * N + n];
        out.data[m * N + n] = static_cast<float>(acc);
      }
  } else if (a.type.lanes.size() == 2) {
    auto M = as[0], K = as[1], N = bs[1];
    auto X = a.type.lanes[0], Y = a.type.lanes[1], Z = b.type.lanes[1];
    for (std::int64_t m = 0; m < M; ++m)
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t x = 0; x < X; ++x)
          for (std::int64_t z = 0; z < Z; ++z) {
            double acc = 0.0;
            for (std::int64_t k = 0; k < K; ++k)
              for (std::int64_t y = 0; y < Y; ++y)
                acc += static_cast<double>(a.data[((m * K + k) * X + x) * Y + y]) *
                       b.data[((k * N + n) * Y + y) * Z + z];
            out.data[((m * N + n) * X + x) * Z + z] = static_cast<float>(acc);
          }
  } else {
    auto M = as[0], K = as[1], N = bs[1];
    auto Z = b.type.lanes[0];
    for (std::int64_t m = 0; m < M; ++m)
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t z = 0; z < Z; ++z) {
          double acc = 0.0;
          for (std::int64_t k = 0; k < K; ++k)
            acc += static_cast<double>(a.data[m * K + k]) * b.data[(k * N + n) * Z + z];
          out.data[(m * N + n) * Z + z] = static_cast<float>(acc);
        }
  }
  return out;
}

// Maps a logical index of the unpacked tensor to its packed physical offset.
std::int64_t packed_offset(const Shape &logical, const Shape &lanes, const Shape &axes,
                           const Shape &packed_strides, std::size_t rank) {
  Shape phys(rank + lanes.size());
  for (std::size_t i = 0; i < rank; ++i)
    phys[i] = logical[i];
  for (std::size_t k = 0; k < axes.size(); ++k) {
    phys[axes[k]] = logical[axes[k]] / lanes[k];
    phys[rank + k] = logical[axes[k]] % lanes[k];
  }
  return offset_of(phys, packed_strides);
}

} // namespace

TensorValue::TensorValue(TensorType t, std::vector<float> d)
    : type(std::move(t)), data(std::move(d)) {
  if (static_cast<std::int64_t>(data.size()) != type.element_count())
    throw Error(ErrorCode::TypeMismatch, "payload length does not match " + type.to_string());
}

TensorValue TensorValue::zeros(const TensorType &t) {
  return TensorValue(t, std::vector<float>(static_cast<std::size_t>(t.element_count()), 0.0f));
}

TensorValue TensorValue::random(const TensorType &t, std::mt19937_64 &rng, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> d(static_cast<std::size_t>(t.element_count()));
  for (auto &x : d)
    x = dist(rng);
  TensorValue v(t, std::move(d));
  round_if_half(v);
  return v;
}

TensorValue apply_op(const OpKind &kind, const std::vector<TensorValue> &inputs) {
  std::vector<TensorType> types;
  for (const auto &v : inputs)
    types.push_back(v.type);
  auto out_t = infer_type(kind, types);
  TensorValue out;
  switch (kind.op) {
  case Op::Input:
    throw Error(ErrorCode::MissingInput, "input '" + kind.name + "' has no bound value");
  case Op::Constant:
    out = TensorValue(out_t, *kind.data);
    break;
  case Op::Unary: {
    out = inputs[0];
    for (auto &x : out.data) {
      switch (kind.unary) {
      case UnaryFn::Exp: x = std::exp(x); break;
      case UnaryFn::Neg: x = -x; break;
      case UnaryFn::Abs: x = std::fabs(x); break;
      }
    }
    break;
  }
  case Op::Binary: {
    out = inputs[0];
    const auto &b = inputs[1].data;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      switch (kind.binary) {
      case BinaryFn::Add: out.data[i] += b[i]; break;
      case BinaryFn::Mul: out.data[i] *= b[i]; break;
      case BinaryFn::Sub: out.data[i] -= b[i]; break;
      }
    }
    break;
  }
  case Op::MatMul:
    out = matmul(inputs[0], inputs[1], out_t);
    break;
  case Op::Transpose: {
    out = TensorValue::zeros(out_t);
    const auto in_strides = strides_of(inputs[0].type.shape);
    std::int64_t pos = 0;
    Shape src(kind.perm.size());
    for_each_index(out_t.shape, [&](const Shape &o) {
      for (std::size_t i = 0; i < o.size(); ++i)
        src[kind.perm[i]] = o[i];
      out.data[pos++] = inputs[0].data[offset_of(src, in_strides)];
    });
    break;
  }
  case Op::Pack: {
    out = TensorValue::zeros(out_t);
    const auto pstrides = strides_of(out_t.physical_shape());
    const auto rank = inputs[0].type.rank();
    std::int64_t pos = 0;
    for_each_index(inputs[0].type.shape, [&](const Shape &x) {
      out.data[packed_offset(x, kind.lanes, kind.axes, pstrides, rank)] = inputs[0].data[pos++];
    });
    break;
  }
  case Op::Unpack: {
    out = TensorValue::zeros(out_t);
    const auto pstrides = strides_of(inputs[0].type.physical_shape());
    const auto rank = out_t.rank();
    std::int64_t pos = 0;
    for_each_index(out_t.shape, [&](const Shape &x) {
      out.data[pos++] =
          inputs[0].data[packed_offset(x, inputs[0].type.lanes, kind.axes, pstrides, rank)];
    });
    break;
  }
  case Op::Reshape:
  case Op::Boxing:
    out = TensorValue(out_t, inputs[0].data);
    break;
  case Op::Slice: {
    out = TensorValue::zeros(out_t);
    const auto in_strides = strides_of(inputs[0].type.shape);
    std::int64_t pos = 0;
    Shape src(out_t.rank());
    for_each_index(out_t.shape, [&](const Shape &o) {
      for (std::size_t i = 0; i < o.size(); ++i)
        src[i] = o[i] + kind.begins[i];
      out.data[pos++] = inputs[0].data[offset_of(src, in_strides)];
    });
    break;
  }
  }
  round_if_half(out);
  return out;
}

std::vector<TensorValue> eval_all(const Graph &g, const TensorMap &inputs) {
  std::vector<TensorValue> values(g.size());
  for (const auto &n : g.nodes) {
    if (n.kind.op == Op::Input) {
      auto it = inputs.find(n.kind.name);
      if (it == inputs.end())
        throw Error(ErrorCode::MissingInput, "no value for input '" + n.kind.name + "'");
      if (!(it->second.type == n.type))
        throw Error(ErrorCode::TypeMismatch, "input '" + n.kind.name + "' expects " +
                                                 n.type.to_string() + ", got " +
                                                 it->second.type.to_string());
      values[n.id] = it->second;
      round_if_half(values[n.id]);
      continue;
    }
    std::vector<TensorValue> args;
    args.reserve(n.inputs.size());
    for (auto i : n.inputs)
      args.push_back(values[i]);
    values[n.id] = apply_op(n.kind, args);
  }
  return values;
}

std::vector<TensorValue> eval(const Graph &g, const TensorMap &inputs) {
  auto all = eval_all(g, inputs);
  std::vector<TensorValue> out;
  for (auto id : g.outputs)
    out.push_back(all[id]);
  return out;
}

TensorMap random_inputs(const Graph &g, std::mt19937_64 &rng) {
  TensorMap m;
  for (auto id : g.inputs) {
    const auto &n = g.node(id);
    m[n.kind.name] = TensorValue::random(n.type, rng);
  }
  return m;
}

double max_relative_error(const TensorValue &a, const TensorValue &b) {
  if (!(a.type == b.type) || a.data.size() != b.data.size())
    return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double diff = std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
    double scale = std::max(1.0, std::fabs(static_cast<double>(b.data[i])));
    if (std::isnan(diff))
      return std::numeric_limits<double>::infinity();
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

double TrafficCounters::total() const {
  double t = 0.0;
  for (const auto &[k, v] : wire_bytes)
    t += v;
  return t;
}

// ---------------------------------------------------------------------------
// Distributed simulation

namespace {

TensorValue concat_axis(const std::vector<TensorValue> &parts, std::size_t axis) {
  TensorType t = parts[0].type;
  t.shape[axis] *= static_cast<std::int64_t>(parts.size());
  const auto phys = parts[0].type.physical_shape();
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= phys[i];
  for (std::size_t i = axis; i < phys.size(); ++i)
    inner *= phys[i];
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(t.element_count()));
  for (std::int64_t o = 0; o < outer; ++o)
    for (const auto &p : parts)
      data.insert(data.end(), p.data.begin() + o * inner, p.data.begin() + (o + 1) * inner);
  return TensorValue(t, std::move(data));
}

TensorValue chunk_axis(const TensorValue &v, std::size_t axis, std::int64_t parts,
                       std::int64_t index) {
  if (v.type.shape[axis] % parts != 0)
    throw Error(ErrorCode::ShardMismatch, "axis not divisible during slice");
  TensorType t = v.type;
  t.shape[axis] /= parts;
  const auto phys = v.type.physical_shape();
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= phys[i];
  for (std::size_t i = axis; i < phys.size(); ++i)
    inner *= phys[i];
  const std::int64_t piece = inner / parts;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(t.element_count()));
  for (std::int64_t o = 0; o < outer; ++o) {
    auto base = v.data.begin() + o * inner + index * piece;
    data.insert(data.end(), base, base + piece);
  }
  return TensorValue(t, std::move(data));
}

// Devices sharing every coordinate except `dim`, ordered by that coordinate.
std::vector<std::int64_t> group_of(const Placement &p, std::int64_t device, std::size_t dim) {
  auto c = p.coords(device);
  std::vector<std::int64_t> g;
  for (std::int64_t k = 0; k < p.dims[dim]; ++k) {
    c[dim] = k;
    g.push_back(p.device_at(c));
  }
  return g;
}

double bytes_of(const TensorValue &v) {
  return static_cast<double>(v.type.element_count()) * byte_width(v.type.dtype);
}

void run_step(const CollectiveStep &step, const Placement &p, std::vector<TensorValue> &locals,
              TrafficCounters &traffic) {
  const auto n = p.device_count();
  const auto parts = p.dims[step.mesh_dim];
  std::vector<TensorValue> next(locals.size());
  double received = 0.0;
  for (std::int64_t dev = 0; dev < n; ++dev) {
    auto group = group_of(p, dev, step.mesh_dim);
    auto coord = p.coords(dev)[step.mesh_dim];
    switch (step.kind) {
    case CollectiveKind::AllReduce: {
      TensorValue acc = locals[group[0]];
      for (std::size_t i = 1; i < group.size(); ++i)
        for (std::size_t e = 0; e < acc.data.size(); ++e)
          acc.data[e] += locals[group[i]].data[e];
      round_if_half(acc);
      received += bytes_of(locals[dev]) * static_cast<double>(parts - 1) / parts;
      next[dev] = std::move(acc);
      break;
    }
    case CollectiveKind::AllGather: {
      std::vector<TensorValue> pieces;
      for (auto m : group)
        pieces.push_back(locals[m]);
      received += bytes_of(locals[dev]) * static_cast<double>(parts - 1);
      next[dev] = concat_axis(pieces, static_cast<std::size_t>(step.from.axis));
      break;
    }
    case CollectiveKind::SliceLocal:
    case CollectiveKind::Scatter:
      next[dev] = chunk_axis(locals[dev], static_cast<std::size_t>(step.to.axis), parts, coord);
      break;
    case CollectiveKind::AllToAll: {
      std::vector<TensorValue> pieces;
      for (auto m : group)
        pieces.push_back(locals[m]);
      auto whole = concat_axis(pieces, static_cast<std::size_t>(step.from.axis));
      received += bytes_of(locals[dev]) * static_cast<double>(parts - 1) / parts;
      next[dev] = chunk_axis(whole, static_cast<std::size_t>(step.to.axis), parts, coord);
      break;
    }
    }
  }
  locals = std::move(next);
  traffic.wire_bytes[step.kind] += received / static_cast<double>(n);
  ++traffic.collectives;
}

struct DistState {
  std::optional<NdSbp> sbp; // nullopt: host (replicated)
  std::vector<TensorValue> locals;
};

} // namespace

DistributedResult eval_distributed(const Graph &dg, const Placement &placement,
                                   const TensorMap &inputs) {
  const auto n = placement.device_count();
  std::vector<DistState> states(dg.size());
  DistributedResult result;
  for (const auto &node : dg.nodes) {
    auto &st = states[node.id];
    if (node.kind.op == Op::Input || node.kind.op == Op::Constant) {
      TensorValue v;
      if (node.kind.op == Op::Input) {
        auto it = inputs.find(node.kind.name);
        if (it == inputs.end())
          throw Error(ErrorCode::MissingInput, "no value for input '" + node.kind.name + "'");
        v = it->second;
        round_if_half(v);
      } else {
        v = apply_op(node.kind, {});
      }
      st.sbp = std::nullopt;
      st.locals.assign(static_cast<std::size_t>(n), v);
      continue;
    }
    if (node.kind.op == Op::Boxing) {
      const auto &src = states[node.inputs[0]];
      st.locals = src.locals;
      for (const auto &step : lower_boxing(node.type, src.sbp, node.kind.box_target, placement))
        run_step(step, placement, st.locals, result.traffic);
      st.sbp = node.kind.box_target;
      continue;
    }
    st.sbp = node.sbp ? node.sbp : std::optional<NdSbp>(NdSbp::broadcast(placement.rank()));
    auto expected = shard_shape(node.type.shape, *st.sbp, placement);
    st.locals.resize(static_cast<std::size_t>(n));
    for (std::int64_t dev = 0; dev < n; ++dev) {
      std::vector<TensorValue> args;
      for (auto in : node.inputs)
        args.push_back(states[in].locals[dev]);
      st.locals[dev] = apply_op(node.kind, args);
      if (st.locals[dev].type.shape != expected)
        throw Error(ErrorCode::ShardMismatch,
                    "node " + std::to_string(node.id) + " produced local shape " +
                        st.locals[dev].type.to_string() + " inconsistent with " +
                        st.sbp->to_string());
    }
  }
  for (auto id : dg.outputs) {
    auto st = states[id];
    if (st.sbp && !st.sbp->all_broadcast())
      for (const auto &step : lower_boxing(dg.node(id).type, st.sbp, std::nullopt, placement))
        run_step(step, placement, st.locals, result.traffic);
    result.outputs.push_back(st.locals.at(0));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Arena execution

namespace {

void store(std::vector<std::byte> &arena, std::int64_t offset, const TensorValue &v) {
  const auto bw = static_cast<std::int64_t>(byte_width(v.type.dtype));
  if (offset < 0 || offset + static_cast<std::int64_t>(v.data.size()) * bw >
                        static_cast<std::int64_t>(arena.size()))
    throw Error(ErrorCode::Internal, "arena write out of bounds");
  auto *dst = arena.data() + offset;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (v.type.dtype == DataType::F32) {
      std::memcpy(dst + i * 4, &v.data[i], 4);
    } else {
      auto bits = f32_to_f16_bits(v.data[i]);
      std::memcpy(dst + i * 2, &bits, 2);
    }
  }
}

TensorValue load(const std::vector<std::byte> &arena, std::int64_t offset, const TensorType &t) {
  TensorValue v = TensorValue::zeros(t);
  const auto *src = arena.data() + offset;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (t.dtype == DataType::F32) {
      std::memcpy(&v.data[i], src + i * 4, 4);
    } else {
      std::uint16_t bits;
      std::memcpy(&bits, src + i * 2, 2);
      v.data[i] = f16_bits_to_f32(bits);
    }
  }
  return v;
}

} // namespace

std::vector<TensorValue> eval_in_arena(const Graph &g, const TensorMap &inputs,
                                       const ArenaLayout &layout) {
  std::vector<std::byte> arena(static_cast<std::size_t>(layout.size_bytes));
  std::map<NodeId, TensorValue> private_values;
  auto read = [&](NodeId id) -> TensorValue {
    auto it = layout.offsets.find(id);
    if (it == layout.offsets.end())
      return private_values.at(id);
    return load(arena, it->second, g.node(id).type);
  };
  for (const auto &node : g.nodes) {
    TensorValue value;
    if (node.kind.op == Op::Input) {
      auto it = inputs.find(node.kind.name);
      if (it == inputs.end())
        throw Error(ErrorCode::MissingInput, "no value for input '" + node.kind.name + "'");
      value = it->second;
      round_if_half(value);
    } else {
      std::vector<TensorValue> args;
      for (auto in : node.inputs)
        args.push_back(read(in));
      value = apply_op(node.kind, args);
    }
    auto it = layout.offsets.find(node.id);
    if (it == layout.offsets.end())
      private_values[node.id] = std::move(value);
    else
      store(arena, it->second, value);
  }
  std::vector<TensorValue> out;
  for (auto id : g.outputs)
    out.push_back(read(id));
  return out;
}

} // namespace minicase
