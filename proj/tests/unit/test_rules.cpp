// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "minicase/examples.hpp"
#include "minicase/rewrite_rules.hpp"
#include "support/oracles.hpp"

using namespace minicase;

TEST_CASE("rule families have the expected members") {
  auto t = rules_transpose();
  REQUIRE(t.size() == 5);
  CHECK(t[0].name == "CombineBinaryLeftTrans");
  CHECK(t[1].name == "CombineBinaryRightTrans");
  CHECK(t[2].name == "CombineUnaryTrans");
  CHECK(t[3].name == "FoldTwoTrans");
  CHECK(t[4].name == "FoldNopTrans");
  auto v = rules_vectorize();
  REQUIRE(v.size() == 2);
  CHECK(v[0].name == "MetaPackOperation");
  CHECK(v[1].name == "FoldNopPack");
  CHECK(rules_by_name("transpose,vectorize").size() == 7);
}

TEST_CASE("permutation composition agrees with executing both transposes") {
  Shape inner{0, 2, 1}, outer{2, 0, 1};
  auto expected = oracle::compose_by_action(inner, outer, {2, 3, 4});
  CHECK(expected == Shape{1, 0, 2});
  CHECK(compose_permutations(inner, outer) == expected);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    Shape p{0, 1, 2}, q{0, 1, 2};
    std::shuffle(p.begin(), p.end(), rng);
    std::shuffle(q.begin(), q.end(), rng);
    CHECK(compose_permutations(p, q) == oracle::compose_by_action(p, q, {2, 3, 4}));
  }
}

TEST_CASE("FoldTwoTrans adds the composed transpose to the outer class") {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {2, 3, 4}));
  auto t1 = b.transpose(a, {0, 2, 1});
  auto t2 = b.transpose(t1, {2, 0, 1});
  b.output(t2);
  auto graph = b.build();
  EGraph g;
  auto ids = g.add_graph(graph);
  apply_all(g, {oracle::rule_named("FoldTwoTrans")});
  auto folded = g.lookup(ENode{OpKind::transpose({1, 0, 2}), {ids[a]}, std::nullopt});
  REQUIRE(folded.has_value());
  CHECK(*folded == g.find(ids[t2]));
}

TEST_CASE("double transpose folds back to its argument in two passes") {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {3, 5}));
  auto t = b.transpose(b.transpose(a, {1, 0}), {1, 0});
  b.output(t);
  EGraph g;
  auto ids = g.add_graph(b.build());
  RuleSet rules{oracle::rule_named("FoldTwoTrans"), oracle::rule_named("FoldNopTrans")};
  apply_all(g, rules);
  apply_all(g, rules);
  CHECK(g.find(ids[t]) == g.find(ids[a]));
}

TEST_CASE("CombineUnaryTrans keeps both forms in one class") {
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {3, 5}));
  auto u = b.unary(UnaryFn::Exp, b.transpose(a, {1, 0}));
  b.output(u);
  EGraph g;
  auto ids = g.add_graph(b.build());
  apply_all(g, {oracle::rule_named("CombineUnaryTrans")});
  auto inner = g.lookup(ENode{OpKind::unary_op(UnaryFn::Exp), {ids[a]}, std::nullopt});
  REQUIRE(inner.has_value());
  auto moved = g.lookup(ENode{OpKind::transpose({1, 0}), {*inner}, std::nullopt});
  REQUIRE(moved.has_value());
  CHECK(*moved == g.find(ids[u]));
  std::size_t forms = 0;
  for (const auto &n : g.eclass(ids[u]).nodes)
    forms += n.kind.op == Op::Unary || n.kind.op == Op::Transpose;
  CHECK(forms == 2);
}

TEST_CASE("no transposes means no transpose rewrites") {
  EGraph g;
  g.add_graph(example_mlp2());
  CHECK(apply_all(g, rules_transpose()) == 0);
}

TEST_CASE("MetaPackOperation packs matmul operands with 2-D lanes") {
  GraphBuilder b;
  auto x = b.input("x", TensorType(DataType::F32, {32, 16}));
  auto w = b.input("w", TensorType(DataType::F32, {16, 32}));
  auto m = b.matmul(x, w);
  b.output(m);
  EGraph g;
  auto ids = g.add_graph(b.build());
  VectorizeConfig cfg;
  cfg.lane_options = {{16, 16}};
  apply_all(g, {rules_vectorize(cfg)[0]});
  auto px = g.lookup(ENode{OpKind::pack({16, 16}, {0, 1}), {ids[x]}, std::nullopt});
  auto pw = g.lookup(ENode{OpKind::pack({16, 16}, {0, 1}), {ids[w]}, std::nullopt});
  REQUIRE(px.has_value());
  REQUIRE(pw.has_value());
  auto pm = g.lookup(ENode{OpKind::matmul(), {*px, *pw}, std::nullopt});
  REQUIRE(pm.has_value());
  CHECK(g.eclass(*pm).type.lanes == Shape{16, 16});
  auto un = g.lookup(ENode{OpKind::unpack({0, 1}), {*pm}, std::nullopt});
  REQUIRE(un.has_value());
  CHECK(*un == g.find(ids[m]));
}

TEST_CASE("MetaPackOperation skips lanes that do not divide") {
  GraphBuilder b;
  auto x = b.input("x", TensorType(DataType::F32, {6, 10}));
  b.output(b.unary(UnaryFn::Exp, x));
  EGraph g;
  g.add_graph(b.build());
  VectorizeConfig cfg;
  cfg.lane_options = {{4}, {16, 16}};
  CHECK(apply_all(g, rules_vectorize(cfg)) == 0);
}

TEST_CASE("blocked Exp operates on 16x16 tiles") {
  GraphBuilder b;
  auto x = b.input("x", TensorType(DataType::F32, {32, 32}));
  auto e = b.unary(UnaryFn::Exp, x);
  b.output(e);
  EGraph g;
  auto ids = g.add_graph(b.build());
  VectorizeConfig cfg;
  cfg.lane_options = {{16, 16}};
  saturate(g, rules_vectorize(cfg));
  auto px = g.lookup(ENode{OpKind::pack({16, 16}, {0, 1}), {ids[x]}, std::nullopt});
  REQUIRE(px.has_value());
  auto pe = g.lookup(ENode{OpKind::unary_op(UnaryFn::Exp), {*px}, std::nullopt});
  REQUIRE(pe.has_value());
  CHECK(g.eclass(*pe).type.lanes == Shape{16, 16});
  CHECK(g.eclass(*pe).type.element_count() == 32 * 32);
}

TEST_CASE("attention saturates to the pass-through chain") {
  auto graph = example_attention();
  EGraph g;
  auto ids = g.add_graph(graph);
  auto report = saturate(g, rules_vectorize());
  CHECK(report.saturated);
  // Unpack(MatMul(Exp(MatMul(Pack Q, Pack K)), Pack V)) with 16x16 blocks.
  GraphBuilder b;
  auto q = b.input("Q", TensorType(DataType::F32, {32, 32}));
  auto k = b.input("K", TensorType(DataType::F32, {32, 64}));
  auto v = b.input("V", TensorType(DataType::F32, {64, 32}));
  auto pq = b.add(OpKind::pack({16, 16}, {0, 1}), {q});
  auto pk = b.add(OpKind::pack({16, 16}, {0, 1}), {k});
  auto pv = b.add(OpKind::pack({16, 16}, {0, 1}), {v});
  auto s = b.matmul(pq, pk);
  auto e = b.unary(UnaryFn::Exp, s);
  auto o = b.matmul(e, pv);
  auto out = b.add(OpKind::unpack({0, 1}), {o});
  b.output(out);
  auto chain = b.build();
  auto cls = g.lookup_term(chain, out);
  REQUIRE(cls.has_value());
  CHECK(*cls == g.find(ids[graph.outputs[0]]));
}

TEST_CASE("rules are sound on random instances") {
  std::mt19937_64 rng(2026);
  for (const auto &rule : oracle::all_rule_names()) {
    CAPTURE(rule);
    bool fired = false;
    for (int i = 0; i < 20; ++i) {
      auto inst = oracle::random_rule_instance(rule, rng);
      auto r = oracle::check_rule_instance(rule, inst, rng);
      fired = fired || r.rule_fired;
      CHECK(r.max_error <= 1e-6);
      CHECK(r.terms >= 1);
    }
    CHECK(fired);
  }
}
