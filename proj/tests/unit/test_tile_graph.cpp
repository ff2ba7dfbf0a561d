// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "minicase/error.hpp"
#include "minicase/examples.hpp"
#include "minicase/tile_graph.hpp"

#include <algorithm>

using namespace minicase;

namespace {

// (A[8,16] x B[16,8]) -> Exp -> x F[8,4]
Graph mm_exp_mm() {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {8, 16}));
  auto w = b.input("B", TensorType(DataType::F32, {16, 8}));
  auto f = b.input("F", TensorType(DataType::F32, {8, 4}));
  auto c = b.matmul(a, w);
  auto e = b.unary(UnaryFn::Exp, c);
  b.output(b.matmul(e, f));
  return b.build();
}

Graph two_independent() {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 4}));
  auto c = b.input("C", TensorType(DataType::F32, {4, 4}));
  b.output(b.unary(UnaryFn::Exp, a));
  b.output(b.unary(UnaryFn::Neg, c));
  return b.build();
}

} // namespace

TEST_CASE("unfused three-level listing names shared iteration variables") {
  auto s = init_tile_graph(mm_exp_mm(), 3);
  CHECK(s.to_string() == "Level 0: Op_0^0={}(MatMul), Op_1^0={}(Unary), Op_2^0={}(MatMul)\n"
                         "Level 1: Op_0^1={i^1,k^1,l^1}(Op_0^0), Op_1^1={i^1,l^1}(Op_1^0), "
                         "Op_2^1={i^1,l^1,j^1}(Op_2^0)\n"
                         "Level 2: Op_0^2={i^2,k^2,l^2}(Op_0^1), Op_1^2={i^2,l^2}(Op_1^1), "
                         "Op_2^2={i^2,l^2,j^2}(Op_2^1)\n");
  CHECK(s.var_extent == std::vector<std::int64_t>{8, 16, 8, 4});
  CHECK(s.ops[0].reduction_vars() == std::vector<int>{1});
  CHECK(s.ops[2].reduction_vars() == std::vector<int>{2});
}

TEST_CASE("merging at the top level fuses a producer into its consumer") {
  auto s = merge(init_tile_graph(mm_exp_mm(), 3), 1, 2, 2);
  const auto &n = s.node(2, 2);
  CHECK(n.children == std::vector<int>{1, 2});
  CHECK(s.levels[2].count(1) == 0);
  CHECK(s.to_string().find("Op_2^2={i^2,l^2,j^2}(Op_1^1,Op_2^1)") != std::string::npos);
  CHECK(s.node_of(1, 2) == 2);
  CHECK(s.relation(1, 1) == std::vector<int>{0, 1});

  // The inner level can follow once the outer level is shared.
  auto inner = merge(s, 1, 2, 1);
  CHECK(inner.node(1, 2).children == std::vector<int>{1, 2});
  CHECK(inner.node(2, 2).children == std::vector<int>{2});
}

TEST_CASE("illegal merges are rejected") {
  auto s = init_tile_graph(mm_exp_mm(), 3);
  // Not fused above.
  CHECK_THROWS_AS(merge(s, 1, 2, 1), Error);
  // Consumer into producer.
  CHECK_THROWS_AS(merge(s, 2, 1, 2), Error);
  // Skipping an operator would form a cycle through Op_1.
  CHECK_THROWS_AS(merge(s, 0, 2, 2), Error);
  // Op_0 reduces over k, which Op_1 never iterates.
  CHECK_NOTHROW(merge(s, 0, 1, 2));

  auto ind = init_tile_graph(two_independent(), 2);
  try {
    merge(ind, 0, 1, 1);
    FAIL("expected IllegalMerge");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::IllegalMerge);
  }
}

TEST_CASE("a fused loop may not split a consumed reduction") {
  // D = (A x B) x E and D + A: the add ties D's column variable to A's column,
  // which is the reduction variable of the first matmul.
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 6}));
  auto w = b.input("B", TensorType(DataType::F32, {6, 4}));
  auto e = b.input("E", TensorType(DataType::F32, {4, 6}));
  auto c = b.matmul(a, w);
  auto d = b.matmul(c, e);
  b.output(b.binary(BinaryFn::Add, d, a));
  auto s = init_tile_graph(b.build(), 2);
  CHECK(s.ops[1].uses(s.ops[0].reduction_vars().at(0)));
  try {
    merge(s, 0, 1, 1);
    FAIL("expected IllegalMerge");
  } catch (const Error &err) {
    CHECK(err.code() == ErrorCode::IllegalMerge);
  }
}

TEST_CASE("aliased iteration variables are rejected") {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 4}));
  auto w = b.input("B", TensorType(DataType::F32, {4, 4}));
  b.output(b.binary(BinaryFn::Add, b.matmul(a, w), a));
  CHECK_THROWS_AS(init_tile_graph(b.build(), 2), Error);
}

TEST_CASE("reorder accepts permutations and rejects anything else") {
  auto s = init_tile_graph(mm_exp_mm(), 3);
  auto r = reorder(s, 0, 2, {2, 0, 1});
  CHECK(r.node(2, 0).loops == std::vector<int>{2, 0, 1});
  CHECK(reorder(r, 0, 2, {0, 1, 2}).key() == s.key());
  CHECK(reorder(s, 0, 2, {0, 1, 2}).key() == s.key());
  try {
    reorder(s, 0, 2, {0, 1});
    FAIL("expected BadPermutation");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::BadPermutation);
  }
  CHECK_THROWS_AS(reorder(s, 0, 2, {0, 1, 1}), Error);
  CHECK_THROWS_AS(reorder(s, 0, 0, {}), Error);
}

TEST_CASE("legal actions are distinct and all applicable") {
  auto s = init_tile_graph(mm_exp_mm(), 3);
  auto acts = legal_actions(s);
  std::vector<std::string> keys;
  std::size_t merges = 0;
  for (const auto &a : acts) {
    auto next = apply_action(s, a);
    keys.push_back(next.key());
    CHECK(next.key() != s.key());
    if (a.kind == ScheduleAction::Kind::Merge)
      ++merges;
  }
  std::sort(keys.begin(), keys.end());
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
  // Top-level merges along both edges; inner levels need outer fusion first.
  CHECK(merges == 2);
  // Two 3-loop nodes and one 2-loop node per tiled level.
  CHECK(acts.size() == merges + 2 * (5 + 5 + 1));
}

TEST_CASE("non-tileable operators are rejected") {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 4}));
  b.output(b.transpose(a, {1, 0}));
  CHECK_THROWS_AS(init_tile_graph(b.build(), 2), Error);
  CHECK_THROWS_AS(init_tile_graph(example_tile_mm(), 1), Error);
}
