// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "minicase/distribution.hpp"
#include "minicase/error.hpp"
#include "minicase/examples.hpp"
#include "minicase/interpreter.hpp"
#include "support/dist_oracle.hpp"

#include <algorithm>
#include <random>

using namespace minicase;

namespace {

NdSbp nd(std::initializer_list<Sbp> e) { return NdSbp{std::vector<Sbp>(e)}; }

bool has_signature(const std::vector<NdSignature> &sigs, const std::vector<NdSbp> &in,
                   const NdSbp &out) {
  return std::any_of(sigs.begin(), sigs.end(),
                     [&](const NdSignature &s) { return s.inputs == in && s.output == out; });
}

// Host inputs -> Boxing to the signature's operand states -> op -> host.
Graph single_op_graph(const OpKind &kind, const std::vector<TensorType> &inputs,
                      const NdSignature &s, const Placement &p) {
  GraphBuilder b;
  std::vector<NodeId> ins;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto x = b.input("x" + std::to_string(i), inputs[i]);
    if (!s.inputs[i].has_partial()) {
      ins.push_back(b.add(OpKind::boxing(s.inputs[i]), {x}));
      continue;
    }
    // A Partial operand is produced exactly as x * I with per-dim matmul
    // signatures chosen to land on the requested state.
    auto k = inputs[i].shape.at(1);
    std::vector<float> eye(static_cast<std::size_t>(k * k), 0.0f);
    for (std::int64_t j = 0; j < k; ++j)
      eye[static_cast<std::size_t>(j * k + j)] = 1.0f;
    auto id = b.constant(TensorType(DataType::F32, {k, k}), eye);
    NdSbp lhs, rhs;
    for (std::size_t d = 0; d < s.inputs[i].size(); ++d) {
      const auto &t = s.inputs[i][d];
      if (t.is_partial()) {
        lhs.entries.push_back(Sbp::split(1));
        rhs.entries.push_back(Sbp::split(0));
      } else if (t.is_split() && t.axis == 1) {
        lhs.entries.push_back(Sbp::broadcast());
        rhs.entries.push_back(t);
      } else {
        lhs.entries.push_back(t);
        rhs.entries.push_back(Sbp::broadcast());
      }
    }
    ins.push_back(b.add(OpKind::matmul(),
                        {b.add(OpKind::boxing(lhs), {x}), b.add(OpKind::boxing(rhs), {id})},
                        s.inputs[i]));
  }
  auto y = b.add(kind, ins, s.output);
  b.output(b.add(OpKind::boxing(std::nullopt), {y}));
  b.set_placement(p);
  return b.build();
}

Graph single_op_reference(const OpKind &kind, const std::vector<TensorType> &inputs) {
  GraphBuilder b;
  std::vector<NodeId> ins;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    ins.push_back(b.input("x" + std::to_string(i), inputs[i]));
  b.output(b.add(kind, ins));
  return b.build();
}

double distributed_error(const Graph &logical, const Graph &dist, const Placement &p,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto inputs = random_inputs(logical, rng);
  auto ref = eval(logical, inputs);
  auto got = eval_distributed(dist, p, inputs);
  double err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    err = std::max(err, max_relative_error(got.outputs.at(i), ref[i]));
  return err;
}

Graph single_matmul() {
  GraphBuilder b;
  auto x = b.input("a", TensorType(DataType::F32, {4, 4}));
  auto y = b.input("b", TensorType(DataType::F32, {4, 4}));
  b.output(b.matmul(x, y));
  return b.build();
}

} // namespace

TEST_CASE("binary signatures require matching splits") {
  Placement mesh{{2}};
  TensorType t(DataType::F32, {4, 4});
  auto sigs = signatures(OpKind::binary_op(BinaryFn::Add), {t, t}, mesh);
  auto s0 = nd({Sbp::split(0)}), s1 = nd({Sbp::split(1)});
  CHECK(has_signature(sigs, {s0, s0}, s0));
  CHECK(has_signature(sigs, {s1, s1}, s1));
  CHECK_FALSE(has_signature(sigs, {s0, s1}, s0));
  CHECK_FALSE(has_signature(sigs, {s0, s1}, s1));
  auto mm = signatures(OpKind::matmul(), {t, t}, mesh);
  CHECK(has_signature(mm, {s1, s0}, nd({Sbp::partial()})));
}

TEST_CASE("odd dims drop split signatures") {
  Placement mesh{{2}};
  TensorType t(DataType::F32, {3, 4});
  auto sigs = signatures(OpKind::unary_op(UnaryFn::Exp), {t}, mesh);
  CHECK_FALSE(has_signature(sigs, {nd({Sbp::split(0)})}, nd({Sbp::split(0)})));
  CHECK(has_signature(sigs, {nd({Sbp::split(1)})}, nd({Sbp::split(1)})));
  CHECK_FALSE(has_signature(sigs, {nd({Sbp::partial()})}, nd({Sbp::partial()})));
}

TEST_CASE("every signature is sound under simulation") {
  std::vector<std::pair<OpKind, std::vector<TensorType>>> ops;
  TensorType sq(DataType::F32, {4, 8});
  TensorType rt(DataType::F32, {8, 4});
  for (auto fn : {UnaryFn::Exp, UnaryFn::Neg, UnaryFn::Abs})
    ops.push_back({OpKind::unary_op(fn), {sq}});
  for (auto fn : {BinaryFn::Add, BinaryFn::Mul, BinaryFn::Sub})
    ops.push_back({OpKind::binary_op(fn), {sq, sq}});
  ops.push_back({OpKind::matmul(), {sq, rt}});
  ops.push_back({OpKind::transpose({1, 0}), {sq}});
  ops.push_back({OpKind::pack({2}, {1}), {sq}});
  ops.push_back({OpKind::reshape({8, 4}), {sq}});
  ops.push_back({OpKind::slice({0, 2}, {4, 6}), {sq}});
  for (auto mesh : {Placement{{2}}, Placement{{2, 2}}}) {
    std::uint64_t seed = 1;
    for (const auto &[kind, in] : ops) {
      auto ref = single_op_reference(kind, in);
      auto sigs = signatures(kind, in, mesh);
      REQUIRE_FALSE(sigs.empty());
      for (const auto &s : sigs) {
        auto dg = single_op_graph(kind, in, s, mesh);
        INFO(op_name(kind.op), " on ", mesh.to_string(), " output ", s.output.to_string());
        CHECK(distributed_error(ref, dg, mesh, seed++) <= 1e-5);
      }
    }
  }
}

TEST_CASE("unpack signatures are sound after a pack") {
  TensorType t(DataType::F32, {4, 8});
  for (auto mesh : {Placement{{2}}, Placement{{2, 2}}}) {
    auto packed = infer_type(OpKind::pack({2}, {1}), {t});
    auto sigs = signatures(OpKind::unpack({1}), {packed}, mesh);
    REQUIRE_FALSE(sigs.empty());
    for (const auto &s : sigs) {
      if (s.inputs[0].has_partial())
        continue;
      GraphBuilder rb;
      auto rx = rb.input("x0", t);
      rb.output(rb.add(OpKind::unpack({1}), {rb.add(OpKind::pack({2}, {1}), {rx})}));
      GraphBuilder b;
      auto x = b.input("x0", t);
      auto box = b.add(OpKind::boxing(s.inputs[0]), {x});
      auto p = b.add(OpKind::pack({2}, {1}), {box}, s.inputs[0]);
      auto u = b.add(OpKind::unpack({1}), {p}, s.output);
      b.output(b.add(OpKind::boxing(std::nullopt), {u}));
      INFO(mesh.to_string(), " ", s.output.to_string());
      CHECK(distributed_error(rb.build(), b.build(), mesh, 5) <= 1e-5);
    }
  }
}

TEST_CASE("a single matmul cluster holds split and partial states") {
  auto g = single_matmul();
  auto d = build_dist_egraph(g, Placement{{2}});
  const auto &cluster = d.cluster.at(2);
  CHECK(cluster.size() >= 3);
  CHECK(cluster.count(nd({Sbp::split(0)})) == 1);
  CHECK(cluster.count(nd({Sbp::split(1)})) == 1);
  CHECK(cluster.count(nd({Sbp::partial()})) == 1);
  REQUIRE(d.roots.size() == 1);
  CHECK_FALSE(d.egraph.eclass(d.roots[0]).sbp.has_value());
}

TEST_CASE("a one-device mesh has exactly one strategy per node") {
  auto g = example_mlp2();
  Placement one{{1}};
  auto d = build_dist_egraph(g, one);
  for (const auto &[id, states] : d.cluster) {
    CHECK(states.size() == 1);
    CHECK(states.begin()->first.all_broadcast());
  }
  for (const auto &[id, states] : d.reshard)
    CHECK(states.empty());
}

TEST_CASE("distributed graphs are rejected as input") {
  GraphBuilder b;
  auto x = b.input("x", TensorType(DataType::F32, {4}));
  b.output(b.add(OpKind::boxing(nd({Sbp::broadcast()})), {x}));
  CHECK_THROWS_AS(build_dist_egraph(b.build(), Placement{{2}}), Error);
}

TEST_CASE("distributed strategies preserve semantics and end on the host") {
  auto hw = HardwareSpec::desk();
  for (const auto &name : example_names()) {
    auto g = example_by_name(name);
    if (g.size() > 12)
      continue;
    for (auto mesh : {Placement{{2}}, Placement{{2, 2}}}) {
      auto r = distribute(g, mesh, hw);
      INFO(name, " on ", mesh.to_string());
      validate_graph(r.graph);
      CHECK(distributed_error(g, r.graph, mesh, 9) <= 1e-5);
      for (auto o : r.graph.outputs) {
        const auto &n = r.graph.node(o);
        CHECK(n.kind.op == Op::Boxing);
        CHECK_FALSE(n.kind.box_target.has_value());
      }
      CHECK(r.memory.fits);
    }
  }
}

TEST_CASE("extraction matches exhaustive strategy enumeration") {
  auto hw = HardwareSpec::desk();
  std::vector<std::pair<std::string, Graph>> cases{{"matmul", single_matmul()},
                                                   {"mlp2", example_mlp2()},
                                                   {"fig2", example_fig2()}};
  for (const auto &[name, g] : cases) {
    for (auto mesh : {Placement{{2}}, Placement{{2, 2}}}) {
      INFO(name, " on ", mesh.to_string());
      auto brute = oracle::exhaustive_distribution(g, mesh, hw);
      REQUIRE(brute.found);
      auto r = distribute(g, mesh, hw, std::int64_t{1} << 40);
      CHECK(r.cost == doctest::Approx(brute.cost).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-device memory rejects broadcast-heavy strategies") {
  auto hw = HardwareSpec::desk();
  auto g = example_mlp2();
  Placement mesh{{2, 2}};
  auto all_b = distribute(g, Placement{{1}}, hw);
  auto free = distribute(g, mesh, hw);
  std::int64_t broadcast_peak = all_b.memory.device_peak.at(0);

  // Every split strategy must hold less than the replicated footprint.
  std::int64_t cap = broadcast_peak - 1;
  auto limited = distribute(g, mesh, hw, cap);
  CHECK(limited.memory.fits);
  CHECK(limited.memory.device_peak.at(0) <= cap);
  CHECK(limited.cost >= free.cost - 1e-15);
  CHECK(distributed_error(g, limited.graph, mesh, 3) <= 1e-5);

  CHECK(limited.memory.cluster_sum == limited.memory.device_peak.at(0) * 4);
  CHECK_FALSE(memory_check(all_b.graph, Placement{{1}}, hw, cap).fits);
  CHECK_THROWS_AS(distribute(g, mesh, hw, std::int64_t{1}), Error);
}
