// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/examples.hpp"

#include "minicase/error.hpp"

namespace minicase {

Graph example_fig2() {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 6}));
  auto d = b.input("D", TensorType(DataType::F32, {4, 6}));
  auto ta = b.transpose(a, {1, 0});
  auto td = b.transpose(d, {1, 0});
  auto e = b.unary(UnaryFn::Exp, ta);
  auto s = b.binary(BinaryFn::Add, td, e);
  b.output(b.transpose(s, {1, 0}));
  return b.build();
}

Graph example_attention() {
  GraphBuilder b;
  auto q = b.input("Q", TensorType(DataType::F32, {32, 32}));
  auto k = b.input("K", TensorType(DataType::F32, {32, 64}));
  auto v = b.input("V", TensorType(DataType::F32, {64, 32}));
  auto s = b.matmul(q, k);
  auto p = b.unary(UnaryFn::Exp, s);
  b.output(b.matmul(p, v));
  return b.build();
}

Graph example_mlp2() {
  GraphBuilder b;
  auto x = b.input("X", TensorType(DataType::F32, {8, 16}));
  auto w1 = b.input("W1", TensorType(DataType::F32, {16, 32}));
  auto bias = b.input("bias", TensorType(DataType::F32, {8, 32}));
  auto w2 = b.input("W2", TensorType(DataType::F32, {32, 16}));
  auto h = b.matmul(x, w1);
  auto hb = b.binary(BinaryFn::Add, h, bias);
  b.output(b.matmul(hb, w2));
  return b.build();
}

Graph example_tile_mm() {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {64, 64}));
  auto w = b.input("B", TensorType(DataType::F32, {64, 64}));
  b.output(b.matmul(a, w));
  return b.build();
}

std::vector<std::string> example_names() { return {"fig2", "attention", "mlp2", "tile_mm"}; }

Graph example_by_name(const std::string &name) {
  if (name == "fig2") return example_fig2();
  if (name == "attention") return example_attention();
  if (name == "mlp2") return example_mlp2();
  if (name == "tile_mm") return example_tile_mm();
  throw Error(ErrorCode::Validation, "unknown example '" + name + "'");
}

} // namespace minicase
