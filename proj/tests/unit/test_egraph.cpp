// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "minicase/error.hpp"
#include "minicase/examples.hpp"
#include "minicase/rewrite_rules.hpp"
#include "support/oracles.hpp"

using namespace minicase;

namespace {

EClassId input(EGraph &g, const std::string &name, Shape shape) {
  return g.add(OpKind::input(name, DataType::F32, std::move(shape)), {});
}

} // namespace

TEST_CASE("add is hashconsed") {
  EGraph g;
  auto a = input(g, "a", {2, 3});
  auto b = input(g, "b", {2, 3});
  auto s1 = g.add(OpKind::binary_op(BinaryFn::Add), {a, b});
  auto s2 = g.add(OpKind::binary_op(BinaryFn::Add), {a, b});
  CHECK(s1 == s2);
  auto t = g.add(OpKind::transpose({0, 1}), {a});
  CHECK(t != a);
  CHECK(g.class_count() == 4);
}

TEST_CASE("add rejects ill-typed nodes") {
  EGraph g;
  auto a = input(g, "a", {2, 3});
  auto b = input(g, "b", {3, 2});
  CHECK_THROWS_AS(g.add(OpKind::binary_op(BinaryFn::Add), {a, b}), Error);
}

TEST_CASE("merge is idempotent and checks types") {
  EGraph g;
  auto a = input(g, "a", {2, 3});
  auto b = input(g, "b", {2, 3});
  auto c = input(g, "c", {3, 2});
  CHECK(g.merge(a, a) == a);
  g.merge(a, b);
  CHECK(g.find(a) == g.find(b));
  try {
    g.merge(a, c);
    FAIL("expected TypeMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::TypeMismatch);
  }
}

TEST_CASE("rebuild restores congruence") {
  EGraph g;
  CHECK(g.rebuild() == 0);
  auto a = input(g, "a", {4});
  auto b = input(g, "b", {4});
  auto fa = g.add(OpKind::unary_op(UnaryFn::Neg), {a});
  auto fb = g.add(OpKind::unary_op(UnaryFn::Neg), {b});
  g.merge(a, b);
  CHECK(g.rebuild() >= 1);
  CHECK(g.find(fa) == g.find(fb));
}

TEST_CASE("chain of congruent parents agrees with naive closure") {
  // Leaves a, b, c; f(x) = Neg(x); g(x) = Exp(f(x)). Assert a = b and b = c.
  EGraph g;
  std::vector<EClassId> ids;
  std::vector<std::pair<int, std::vector<int>>> terms;
  for (const char *n : {"a", "b", "c"}) {
    ids.push_back(input(g, n, {3}));
    terms.push_back({100 + static_cast<int>(ids.size()), {}});
  }
  for (int i = 0; i < 3; ++i) {
    ids.push_back(g.add(OpKind::unary_op(UnaryFn::Neg), {ids[i]}));
    terms.push_back({1, {i}});
  }
  for (int i = 0; i < 3; ++i) {
    ids.push_back(g.add(OpKind::unary_op(UnaryFn::Exp), {ids[3 + i]}));
    terms.push_back({2, {3 + i}});
  }
  g.merge(ids[0], ids[1]);
  g.merge(ids[1], ids[2]);
  g.rebuild();
  auto expected = oracle::congruence_closure(terms, {{0, 1}, {1, 2}});
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j)
      CHECK((g.find(ids[i]) == g.find(ids[j])) == (expected[i] == expected[j]));
  CHECK(g.class_count() == 3);
}

TEST_CASE("hashcons keys stay canonical after rebuild") {
  auto graph = example_fig2();
  EGraph g;
  g.add_graph(graph);
  saturate(g, rules_transpose());
  for (auto id : g.class_ids())
    for (const auto &n : g.eclass(id).nodes) {
      auto found = g.lookup(n);
      REQUIRE(found.has_value());
      CHECK(*found == id);
    }
}

TEST_CASE("saturation report") {
  EGraph g;
  auto ids = g.add_graph(example_fig2());
  auto empty = saturate(g, {});
  CHECK(empty.iterations == 0);
  CHECK(empty.saturated);

  auto r = saturate(g, rules_transpose());
  CHECK(r.saturated);
  CHECK(r.iterations > 0);
  auto productive = g.productive_classes();
  for (auto id : g.class_ids())
    CHECK(productive[id]);

  // The transpose-free term Add(D, Exp(A)) is represented in the root class.
  GraphBuilder b;
  auto a = b.input("A", TensorType(DataType::F32, {4, 6}));
  auto d = b.input("D", TensorType(DataType::F32, {4, 6}));
  auto s = b.binary(BinaryFn::Add, d, b.unary(UnaryFn::Exp, a));
  b.output(s);
  auto term = b.build();
  auto cls = g.lookup_term(term, s);
  REQUIRE(cls.has_value());
  CHECK(*cls == g.find(ids.back()));
}

TEST_CASE("node limit stops saturation early") {
  EGraph g;
  g.add_graph(example_fig2());
  auto r = saturate(g, rules_transpose(), {30, 8});
  CHECK_FALSE(r.saturated);
  CHECK(r.node_count >= 8);
}

TEST_CASE("monotone growth of represented terms") {
  EGraph g;
  auto ids = g.add_graph(example_fig2());
  std::size_t before = oracle::for_each_selection(g, {ids.back()}, [](const Selection &) {});
  apply_all(g, rules_transpose());
  std::size_t after = oracle::for_each_selection(g, {ids.back()}, [](const Selection &) {});
  CHECK(after >= before);
}

TEST_CASE("dump is deterministic and DOT export is well formed") {
  auto build = [] {
    EGraph g;
    g.add_graph(example_fig2());
    saturate(g, rules_transpose());
    return g;
  };
  auto g1 = build(), g2 = build();
  CHECK(g1.dump() == g2.dump());
  auto dot = g1.to_dot();
  CHECK(dot.find("digraph") == 0);
  CHECK(dot.find("style=dashed") != std::string::npos);
}
