// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/tensor_ir.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace minicase {

namespace {

std::string join(const Shape &v, const char *sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

[[noreturn]] void fail(ErrorCode code, const std::string &msg) {
  throw Error(code, msg);
}

void expect_arity(const OpKind &kind, const std::vector<TensorType> &inputs) {
  if (inputs.size() != kind.arity())
    fail(ErrorCode::ArityMismatch, std::string(op_name(kind.op)) + " expects " +
                                       std::to_string(kind.arity()) +
                                       " inputs, got " +
                                       std::to_string(inputs.size()));
}

void expect_unpacked(const OpKind &kind, const TensorType &t) {
  if (t.is_packed())
    fail(ErrorCode::TypeError,
         std::string(op_name(kind.op)) + " requires an unpacked operand, got " +
             t.to_string());
}

} // namespace

const char *dtype_name(DataType dt) { return dt == DataType::F32 ? "f32" : "f16"; }

DataType parse_dtype(const std::string &text) {
  if (text == "f32")
    return DataType::F32;
  if (text == "f16")
    return DataType::F16;
  throw Error(ErrorCode::Parse, "unknown dtype '" + text + "'");
}

std::uint16_t f32_to_f16_bits(float value) {
  auto x = std::bit_cast<std::uint32_t>(value);
  std::uint32_t sign = (x >> 16) & 0x8000u;
  std::uint32_t exp = (x >> 23) & 0xffu;
  std::uint32_t mant = x & 0x7fffffu;

  if (exp == 0xff) // inf / nan
    return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));

  int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1f)
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (e <= 0) {
    if (e < -10)
      return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    int shift = 14 - e;
    std::uint32_t half = mant >> shift;
    std::uint32_t rem = mant & ((1u << shift) - 1);
    std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half & 1u)))
      ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  std::uint32_t rem = mant & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u)))
    ++half; // may carry into the exponent, which is still correct
  return static_cast<std::uint16_t>(sign | half);
}

float f16_bits_to_f32(std::uint16_t bits) {
  std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  std::uint32_t exp = (bits >> 10) & 0x1fu;
  std::uint32_t mant = bits & 0x3ffu;
  std::uint32_t out;
  if (exp == 0) {
    if (mant == 0) {
      out = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      mant &= 0x3ffu;
      out = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    out = sign | 0x7f800000u | (mant << 13);
  } else {
    out = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

float round_to_f16(float value) { return f16_bits_to_f32(f32_to_f16_bits(value)); }

std::int64_t product(const Shape &dims) {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1},
                         std::multiplies<>());
}

Shape TensorType::physical_shape() const {
  Shape s = shape;
  s.insert(s.end(), lanes.begin(), lanes.end());
  return s;
}

std::string TensorType::to_string() const {
  std::string s = "[" + join(shape) + "]";
  if (is_packed())
    s += "<" + join(lanes) + ">";
  return s + " " + dtype_name(dtype);
}

const char *op_name(Op op) {
  switch (op) {
  case Op::Input: return "Input";
  case Op::Constant: return "Constant";
  case Op::Unary: return "Unary";
  case Op::Binary: return "Binary";
  case Op::MatMul: return "MatMul";
  case Op::Transpose: return "Transpose";
  case Op::Pack: return "Pack";
  case Op::Unpack: return "Unpack";
  case Op::Reshape: return "Reshape";
  case Op::Slice: return "Slice";
  case Op::Boxing: return "Boxing";
  }
  return "?";
}

const char *unary_name(UnaryFn fn) {
  switch (fn) {
  case UnaryFn::Exp: return "Exp";
  case UnaryFn::Neg: return "Neg";
  case UnaryFn::Abs: return "Abs";
  }
  return "?";
}

const char *binary_name(BinaryFn fn) {
  switch (fn) {
  case BinaryFn::Add: return "Add";
  case BinaryFn::Mul: return "Mul";
  case BinaryFn::Sub: return "Sub";
  }
  return "?";
}

OpKind OpKind::input(std::string name, DataType dt, Shape shape) {
  OpKind k;
  k.op = Op::Input;
  k.name = std::move(name);
  k.dtype = dt;
  k.shape = std::move(shape);
  return k;
}

OpKind OpKind::constant(DataType dt, Shape shape, std::vector<float> values) {
  OpKind k;
  k.op = Op::Constant;
  k.dtype = dt;
  k.shape = std::move(shape);
  if (dt == DataType::F16)
    for (auto &v : values)
      v = round_to_f16(v);
  k.data = std::make_shared<const std::vector<float>>(std::move(values));
  return k;
}

OpKind OpKind::unary_op(UnaryFn fn) {
  OpKind k;
  k.op = Op::Unary;
  k.unary = fn;
  return k;
}

OpKind OpKind::binary_op(BinaryFn fn) {
  OpKind k;
  k.op = Op::Binary;
  k.binary = fn;
  return k;
}

OpKind OpKind::matmul() {
  OpKind k;
  k.op = Op::MatMul;
  return k;
}

OpKind OpKind::transpose(Shape perm) {
  OpKind k;
  k.op = Op::Transpose;
  k.perm = std::move(perm);
  return k;
}

OpKind OpKind::pack(Shape lanes, Shape axes) {
  OpKind k;
  k.op = Op::Pack;
  k.lanes = std::move(lanes);
  k.axes = std::move(axes);
  return k;
}

OpKind OpKind::unpack(Shape axes) {
  OpKind k;
  k.op = Op::Unpack;
  k.axes = std::move(axes);
  return k;
}

OpKind OpKind::reshape(Shape new_shape) {
  OpKind k;
  k.op = Op::Reshape;
  k.shape = std::move(new_shape);
  return k;
}

OpKind OpKind::slice(Shape begins, Shape ends) {
  OpKind k;
  k.op = Op::Slice;
  k.begins = std::move(begins);
  k.ends = std::move(ends);
  return k;
}

OpKind OpKind::boxing(std::optional<NdSbp> target) {
  OpKind k;
  k.op = Op::Boxing;
  k.box_target = std::move(target);
  return k;
}

std::size_t OpKind::arity() const {
  switch (op) {
  case Op::Input:
  case Op::Constant:
    return 0;
  case Op::Binary:
  case Op::MatMul:
    return 2;
  default:
    return 1;
  }
}

std::string OpKind::to_string() const {
  switch (op) {
  case Op::Input: return "Input(" + name + ")";
  case Op::Constant: return "Constant[" + join(shape) + "]";
  case Op::Unary: return unary_name(unary);
  case Op::Binary: return binary_name(binary);
  case Op::MatMul: return "MatMul";
  case Op::Transpose: return "T[" + join(perm) + "]";
  case Op::Pack: return "Pack<" + join(lanes) + ">@[" + join(axes) + "]";
  case Op::Unpack: return "Unpack@[" + join(axes) + "]";
  case Op::Reshape: return "Reshape[" + join(shape) + "]";
  case Op::Slice: return "Slice[" + join(begins) + ":" + join(ends) + "]";
  case Op::Boxing:
    return "Box(" + (box_target ? box_target->to_string() : std::string("host")) +
           ")";
  }
  return "?";
}

bool operator==(const OpKind &a, const OpKind &b) {
  if (a.op != b.op)
    return false;
  switch (a.op) {
  case Op::Input:
    return a.name == b.name && a.dtype == b.dtype && a.shape == b.shape;
  case Op::Constant:
    return a.dtype == b.dtype && a.shape == b.shape &&
           (a.data == b.data || (a.data && b.data && *a.data == *b.data));
  case Op::Unary: return a.unary == b.unary;
  case Op::Binary: return a.binary == b.binary;
  case Op::MatMul: return true;
  case Op::Transpose: return a.perm == b.perm;
  case Op::Pack: return a.lanes == b.lanes && a.axes == b.axes;
  case Op::Unpack: return a.axes == b.axes;
  case Op::Reshape: return a.shape == b.shape;
  case Op::Slice: return a.begins == b.begins && a.ends == b.ends;
  case Op::Boxing: return a.box_target == b.box_target;
  }
  return false;
}

std::size_t OpKind::hash() const {
  std::size_t h = std::hash<int>()(static_cast<int>(op));
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
  auto mix_vec = [&](const Shape &v) {
    mix(v.size());
    for (auto x : v)
      mix(std::hash<std::int64_t>()(x));
  };
  switch (op) {
  case Op::Input: mix(std::hash<std::string>()(name)); mix_vec(shape); break;
  case Op::Constant:
    mix_vec(shape);
    if (data && !data->empty())
      mix(std::hash<float>()((*data)[0]));
    break;
  case Op::Unary: mix(static_cast<std::size_t>(unary)); break;
  case Op::Binary: mix(static_cast<std::size_t>(binary)); break;
  case Op::Transpose: mix_vec(perm); break;
  case Op::Pack: mix_vec(lanes); mix_vec(axes); break;
  case Op::Unpack: mix_vec(axes); break;
  case Op::Reshape: mix_vec(shape); break;
  case Op::Slice: mix_vec(begins); mix_vec(ends); break;
  case Op::Boxing:
    if (box_target)
      for (const auto &e : box_target->entries)
        mix(static_cast<std::size_t>(e.kind) * 31 + static_cast<std::size_t>(e.axis));
    else
      mix(0xb0c5);
    break;
  default: break;
  }
  return h;
}

bool is_permutation(const Shape &perm) {
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || seen[p])
      return false;
    seen[p] = true;
  }
  return true;
}

bool is_identity_permutation(const Shape &perm) {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != static_cast<std::int64_t>(i))
      return false;
  return true;
}

Shape invert_permutation(const Shape &perm) {
  Shape inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    inv[perm[i]] = static_cast<std::int64_t>(i);
  return inv;
}

TensorType infer_type(const OpKind &kind, const std::vector<TensorType> &in) {
  expect_arity(kind, in);
  switch (kind.op) {
  case Op::Input:
  case Op::Constant: {
    for (auto d : kind.shape)
      if (d < 1)
        fail(ErrorCode::ShapeMismatch, "dims must be positive");
    if (kind.op == Op::Constant && kind.data &&
        static_cast<std::int64_t>(kind.data->size()) != product(kind.shape))
      fail(ErrorCode::ShapeMismatch, "constant payload size mismatch");
    return TensorType(kind.dtype, kind.shape);
  }
  case Op::Unary:
  case Op::Boxing:
    return in[0];
  case Op::Binary:
    if (!(in[0] == in[1]))
      fail(ErrorCode::ShapeMismatch,
           "binary operands differ: " + in[0].to_string() + " vs " + in[1].to_string());
    return in[0];
  case Op::MatMul: {
    const auto &a = in[0];
    const auto &b = in[1];
    if (a.dtype != b.dtype)
      fail(ErrorCode::TypeError, "matmul dtype mismatch");
    if (a.rank() != 2 || b.rank() != 2)
      fail(ErrorCode::ShapeMismatch, "matmul operands must be rank 2");
    if (a.shape[1] != b.shape[0])
      fail(ErrorCode::ShapeMismatch, "matmul inner dims differ: " + a.to_string() +
                                         " x " + b.to_string());
    if (!a.is_packed() && !b.is_packed())
      return TensorType(a.dtype, {a.shape[0], b.shape[1]});
    if (a.lanes.size() == 2 && b.lanes.size() == 2) {
      if (a.lanes[1] != b.lanes[0])
        fail(ErrorCode::ShapeMismatch, "matmul inner lanes differ");
      return TensorType(a.dtype, {a.shape[0], b.shape[1]}, {a.lanes[0], b.lanes[1]});
    }
    if (!a.is_packed() && b.lanes.size() == 1)
      return TensorType(a.dtype, {a.shape[0], b.shape[1]}, b.lanes);
    fail(ErrorCode::TypeError, "unsupported matmul packing: " + a.to_string() +
                                   " x " + b.to_string());
  }
  case Op::Transpose: {
    expect_unpacked(kind, in[0]);
    if (kind.perm.size() != in[0].rank() || !is_permutation(kind.perm))
      fail(ErrorCode::TypeError, "transpose perm [" + join(kind.perm) +
                                     "] is not a permutation of rank " +
                                     std::to_string(in[0].rank()));
    Shape out(kind.perm.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = in[0].shape[kind.perm[i]];
    return TensorType(in[0].dtype, out);
  }
  case Op::Pack: {
    expect_unpacked(kind, in[0]);
    if (kind.axes.size() != kind.lanes.size() || kind.axes.empty())
      fail(ErrorCode::TypeError, "pack needs one lane per axis");
    Shape out = in[0].shape;
    for (std::size_t k = 0; k < kind.axes.size(); ++k) {
      auto axis = kind.axes[k];
      if (axis < 0 || static_cast<std::size_t>(axis) >= out.size() ||
          (k > 0 && axis <= kind.axes[k - 1]))
        fail(ErrorCode::TypeError, "pack axes must be strictly increasing and in range");
      if (kind.lanes[k] < 1 || out[axis] % kind.lanes[k] != 0)
        fail(ErrorCode::IndivisiblePack,
             "axis " + std::to_string(axis) + " of " + in[0].to_string() +
                 " not divisible by lane " + std::to_string(kind.lanes[k]));
      out[axis] /= kind.lanes[k];
    }
    return TensorType(in[0].dtype, out, kind.lanes);
  }
  case Op::Unpack: {
    const auto &t = in[0];
    if (t.lanes.size() != kind.axes.size() || kind.axes.empty())
      fail(ErrorCode::TypeError, "unpack axes must match the lane count of " + t.to_string());
    Shape out = t.shape;
    for (std::size_t k = 0; k < kind.axes.size(); ++k) {
      auto axis = kind.axes[k];
      if (axis < 0 || static_cast<std::size_t>(axis) >= out.size() ||
          (k > 0 && axis <= kind.axes[k - 1]))
        fail(ErrorCode::TypeError, "unpack axes must be strictly increasing and in range");
      out[axis] *= t.lanes[k];
    }
    return TensorType(t.dtype, out);
  }
  case Op::Reshape: {
    expect_unpacked(kind, in[0]);
    for (auto d : kind.shape)
      if (d < 1)
        fail(ErrorCode::ShapeMismatch, "reshape dims must be positive");
    if (product(kind.shape) != in[0].element_count())
      fail(ErrorCode::ShapeMismatch, "reshape changes element count");
    return TensorType(in[0].dtype, kind.shape);
  }
  case Op::Slice: {
    expect_unpacked(kind, in[0]);
    const auto &s = in[0].shape;
    if (kind.begins.size() != s.size() || kind.ends.size() != s.size())
      fail(ErrorCode::ShapeMismatch, "slice bounds rank mismatch");
    Shape out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (kind.begins[i] < 0 || kind.ends[i] > s[i] || kind.begins[i] >= kind.ends[i])
        fail(ErrorCode::ShapeMismatch, "slice bounds out of range");
      out[i] = kind.ends[i] - kind.begins[i];
    }
    return TensorType(in[0].dtype, out);
  }
  }
  fail(ErrorCode::Internal, "unhandled op");
}

std::size_t Graph::count(Op op) const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [op](const GraphNode &n) { return n.kind.op == op; }));
}

std::vector<std::vector<NodeId>> Graph::users() const {
  std::vector<std::vector<NodeId>> u(nodes.size());
  for (const auto &n : nodes)
    for (auto i : n.inputs)
      if (i >= 0 && static_cast<std::size_t>(i) < nodes.size())
        u[i].push_back(n.id);
  return u;
}

std::vector<Violation> validate_graph(const Graph &g) {
  std::vector<Violation> out;
  auto n = static_cast<NodeId>(g.nodes.size());
  for (NodeId i = 0; i < n; ++i) {
    const auto &node = g.nodes[i];
    if (node.id != i) {
      out.push_back({node.id, "node id does not match its position " + std::to_string(i)});
      continue;
    }
    bool inputs_ok = true;
    for (auto in : node.inputs) {
      if (in < 0 || in >= n) {
        out.push_back({i, "input " + std::to_string(in) + " does not exist"});
        inputs_ok = false;
      } else if (in >= i) {
        out.push_back({i, "cycle: consumes node " + std::to_string(in) +
                              " which does not precede it"});
        inputs_ok = false;
      }
    }
    if (!inputs_ok)
      continue;
    std::vector<TensorType> types;
    for (auto in : node.inputs)
      types.push_back(g.nodes[in].type);
    try {
      auto t = infer_type(node.kind, types);
      if (!(t == node.type))
        out.push_back({i, "declared type " + node.type.to_string() +
                              " differs from inferred " + t.to_string()});
    } catch (const Error &e) {
      out.push_back({i, e.what()});
    }
    if (node.sbp) {
      if (!g.placement)
        out.push_back({i, "sbp annotation without a placement"});
      else if (!shard_divisible(node.type.shape, *node.sbp, *g.placement))
        out.push_back({i, "sbp " + node.sbp->to_string() + " does not divide the tensor"});
    }
  }
  for (auto id : g.inputs)
    if (id < 0 || id >= n || g.nodes[id].kind.op != Op::Input)
      out.push_back({id, "declared input is not an Input node"});
  for (auto id : g.outputs)
    if (id < 0 || id >= n)
      out.push_back({id, "declared output does not exist"});
  return out;
}

NodeId GraphBuilder::input(const std::string &name, const TensorType &type) {
  auto id = add(OpKind::input(name, type.dtype, type.shape), {});
  graph_.inputs.push_back(id);
  return id;
}

NodeId GraphBuilder::constant(const TensorType &type, std::vector<float> values) {
  return add(OpKind::constant(type.dtype, type.shape, std::move(values)), {});
}

NodeId GraphBuilder::add(const OpKind &kind, const std::vector<NodeId> &inputs,
                         std::optional<NdSbp> sbp) {
  std::vector<TensorType> types;
  for (auto i : inputs)
    types.push_back(graph_.node(i).type);
  GraphNode node;
  node.id = static_cast<NodeId>(graph_.nodes.size());
  node.kind = kind;
  node.inputs = inputs;
  node.type = infer_type(kind, types);
  node.sbp = std::move(sbp);
  graph_.nodes.push_back(std::move(node));
  return graph_.nodes.back().id;
}

Graph compact(const Graph &g) {
  std::vector<bool> live(g.size(), false);
  for (auto id : g.outputs)
    live[id] = true;
  for (auto id : g.inputs)
    live[id] = true;
  for (std::size_t i = g.size(); i-- > 0;)
    if (live[i])
      for (auto in : g.nodes[i].inputs)
        live[in] = true;
  Graph out;
  out.placement = g.placement;
  std::vector<NodeId> remap(g.size(), -1);
  for (const auto &n : g.nodes) {
    if (!live[n.id])
      continue;
    GraphNode c = n;
    c.id = static_cast<NodeId>(out.nodes.size());
    for (auto &in : c.inputs)
      in = remap[in];
    remap[n.id] = c.id;
    out.nodes.push_back(std::move(c));
  }
  for (auto id : g.inputs)
    out.inputs.push_back(remap[id]);
  for (auto id : g.outputs)
    out.outputs.push_back(remap[id]);
  return out;
}

std::string graph_to_text(const Graph &g) {
  std::ostringstream os;
  for (const auto &n : g.nodes) {
    os << "%" << n.id << " = " << n.kind.to_string() << "(";
    for (std::size_t i = 0; i < n.inputs.size(); ++i)
      os << (i ? ", " : "") << "%" << n.inputs[i];
    os << ") : " << n.type.to_string();
    if (n.sbp)
      os << " " << n.sbp->to_string();
    os << "\n";
  }
  os << "outputs:";
  for (auto id : g.outputs)
    os << " %" << id;
  os << "\n";
  return os.str();
}

} // namespace minicase
