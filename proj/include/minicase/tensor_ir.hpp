// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Logical dense tensor IR: types, operator vocabulary, graphs and builders.

#pragma once

#include "minicase/sbp.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

using Shape = std::vector<std::int64_t>;
using NodeId = std::int64_t;

enum class DataType : std::uint8_t { F32, F16 };

inline std::size_t byte_width(DataType dt) {
  return dt == DataType::F32 ? 4 : 2;
}
const char *dtype_name(DataType dt);
DataType parse_dtype(const std::string &text);

/// Round-to-nearest-even through IEEE binary16 and back.
float round_to_f16(float value);
std::uint16_t f32_to_f16_bits(float value);
float f16_bits_to_f32(std::uint16_t bits);

std::int64_t product(const Shape &dims);

/// Dense tensor type. `lanes` holds the trailing packed block dims; a packed
/// tensor `[M', N']<16, 16>` stores product(shape) * product(lanes) elements.
struct TensorType {
  DataType dtype = DataType::F32;
  Shape shape;
  Shape lanes;

  TensorType() = default;
  TensorType(DataType dt, Shape s, Shape l = {})
      : dtype(dt), shape(std::move(s)), lanes(std::move(l)) {}

  std::size_t rank() const { return shape.size(); }
  bool is_packed() const { return !lanes.empty(); }
  std::int64_t element_count() const { return product(shape) * product(lanes); }
  std::int64_t byte_size() const {
    return element_count() * static_cast<std::int64_t>(byte_width(dtype));
  }
  /// Shape followed by lanes, i.e. the physical row-major layout.
  Shape physical_shape() const;

  friend bool operator==(const TensorType &, const TensorType &) = default;
  std::string to_string() const;
};

enum class Op : std::uint8_t {
  Input,
  Constant,
  Unary,
  Binary,
  MatMul,
  Transpose,
  Pack,
  Unpack,
  Reshape,
  Slice,
  Boxing,
};

enum class UnaryFn : std::uint8_t { Exp, Neg, Abs };
enum class BinaryFn : std::uint8_t { Add, Mul, Sub };

const char *op_name(Op op);
const char *unary_name(UnaryFn fn);
const char *binary_name(BinaryFn fn);

/// Operator together with its attributes. Only the fields relevant to `op`
/// are populated; the rest stay empty so that equality is structural.
struct OpKind {
  Op op = Op::Input;
  UnaryFn unary = UnaryFn::Exp;
  BinaryFn binary = BinaryFn::Add;
  std::string name;                               // Input
  DataType dtype = DataType::F32;                 // Input, Constant
  Shape shape;                                    // Input, Constant, Reshape
  Shape perm;                                     // Transpose
  Shape lanes;                                    // Pack
  Shape axes;                                     // Pack, Unpack
  Shape begins, ends;                             // Slice
  std::shared_ptr<const std::vector<float>> data; // Constant
  std::optional<NdSbp> box_target;                // Boxing; nullopt = host

  static OpKind input(std::string name, DataType dt, Shape shape);
  static OpKind constant(DataType dt, Shape shape, std::vector<float> values);
  static OpKind unary_op(UnaryFn fn);
  static OpKind binary_op(BinaryFn fn);
  static OpKind matmul();
  static OpKind transpose(Shape perm);
  static OpKind pack(Shape lanes, Shape axes);
  static OpKind unpack(Shape axes);
  static OpKind reshape(Shape new_shape);
  static OpKind slice(Shape begins, Shape ends);
  static OpKind boxing(std::optional<NdSbp> target);

  std::size_t arity() const;
  /// Short human-readable form, e.g. "T[1,0]" or "Pack<16,16>@[0,1]".
  std::string to_string() const;

  friend bool operator==(const OpKind &a, const OpKind &b);
  std::size_t hash() const;
};

/// Output type of `kind` applied to `inputs`. Throws Error with
/// ArityMismatch, ShapeMismatch, IndivisiblePack or TypeError.
TensorType infer_type(const OpKind &kind, const std::vector<TensorType> &inputs);

Shape invert_permutation(const Shape &perm);
bool is_permutation(const Shape &perm);
bool is_identity_permutation(const Shape &perm);

struct GraphNode {
  NodeId id = 0;
  OpKind kind;
  std::vector<NodeId> inputs;
  TensorType type;
  std::optional<NdSbp> sbp; // distributed graphs only
};

/// Nodes are stored in topological order with `nodes[i].id == i`.
struct Graph {
  std::vector<GraphNode> nodes;
  std::vector<NodeId> inputs;
  std::vector<NodeId> outputs;
  std::optional<Placement> placement;

  const GraphNode &node(NodeId id) const {
    return nodes.at(static_cast<std::size_t>(id));
  }
  std::size_t size() const { return nodes.size(); }
  std::size_t count(Op op) const;
  /// Consumers of every node, in node order.
  std::vector<std::vector<NodeId>> users() const;
};

struct Violation {
  NodeId node;
  std::string message;
};

/// Every broken Graph invariant, each tagged with the offending node id.
std::vector<Violation> validate_graph(const Graph &g);

class GraphBuilder {
public:
  NodeId input(const std::string &name, const TensorType &type);
  NodeId constant(const TensorType &type, std::vector<float> values);
  NodeId add(const OpKind &kind, const std::vector<NodeId> &inputs,
             std::optional<NdSbp> sbp = std::nullopt);
  NodeId unary(UnaryFn fn, NodeId x) { return add(OpKind::unary_op(fn), {x}); }
  NodeId binary(BinaryFn fn, NodeId a, NodeId b) {
    return add(OpKind::binary_op(fn), {a, b});
  }
  NodeId matmul(NodeId a, NodeId b) { return add(OpKind::matmul(), {a, b}); }
  NodeId transpose(NodeId x, Shape perm) {
    return add(OpKind::transpose(std::move(perm)), {x});
  }
  void output(NodeId id) { graph_.outputs.push_back(id); }
  void set_placement(Placement p) { graph_.placement = std::move(p); }

  const TensorType &type_of(NodeId id) const { return graph_.node(id).type; }
  Graph build() const { return graph_; }
  const Graph &graph() const { return graph_; }

private:
  Graph graph_;
};

/// Topologically sorted copy with dead nodes (unreachable from outputs)
/// removed and ids renumbered; declared inputs are always kept.
Graph compact(const Graph &g);

/// Stable textual form used in reports and golden tests.
std::string graph_to_text(const Graph &g);

} // namespace minicase
