// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/error.hpp"
#include "minicase/rewrite_rules.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <numeric>

namespace oracle {

namespace {

std::int64_t pick(std::mt19937_64 &rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

Shape random_shape(std::mt19937_64 &rng, std::size_t rank) {
  Shape s(rank);
  for (auto &d : s)
    d = pick(rng, 1, 8);
  return s;
}

Shape random_perm(std::mt19937_64 &rng, std::size_t rank) {
  Shape p(rank);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

Shape permute(const Shape &s, const Shape &perm) {
  Shape out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    out[i] = s[perm[i]];
  return out;
}

// A multiple of `lane` no larger than 8.
std::int64_t multiple_of(std::mt19937_64 &rng, std::int64_t lane) {
  return lane * pick(rng, 1, 8 / lane);
}

const std::vector<Shape> kLaneChoices{{2}, {4}, {8}, {2, 2}, {2, 4}, {4, 4}, {4, 2}};

} // namespace

std::vector<std::string> all_rule_names() {
  return {"CombineBinaryLeftTrans", "CombineBinaryRightTrans", "CombineUnaryTrans",
          "FoldTwoTrans",           "FoldNopTrans",            "MetaPackOperation",
          "FoldNopPack"};
}

Rule rule_named(const std::string &name, const Shape &lanes) {
  RuleSet all = rules_transpose();
  VectorizeConfig cfg;
  if (!lanes.empty())
    cfg.lane_options = {lanes};
  for (auto &r : rules_vectorize(cfg))
    all.push_back(r);
  for (auto &r : all)
    if (r.name == name)
      return r;
  throw Error(ErrorCode::Validation, "no rule " + name);
}

RuleInstance random_rule_instance(const std::string &rule, std::mt19937_64 &rng) {
  GraphBuilder b;
  RuleInstance inst;
  auto f32 = [](Shape s) { return TensorType(DataType::F32, std::move(s)); };
  auto bin = static_cast<BinaryFn>(pick(rng, 0, 2));
  auto un = static_cast<UnaryFn>(pick(rng, 0, 2));
  const std::size_t rank = static_cast<std::size_t>(pick(rng, 1, 3));

  if (rule == "CombineBinaryLeftTrans" || rule == "CombineBinaryRightTrans") {
    auto s = random_shape(rng, rank);
    auto p = random_perm(rng, rank);
    auto x = b.input("x", f32(s));
    auto y = b.input("y", f32(permute(s, p)));
    auto t = b.transpose(x, p);
    b.output(rule == "CombineBinaryLeftTrans" ? b.binary(bin, t, y) : b.binary(bin, y, t));
  } else if (rule == "CombineUnaryTrans") {
    auto s = random_shape(rng, rank);
    auto x = b.input("x", f32(s));
    b.output(b.unary(un, b.transpose(x, random_perm(rng, rank))));
  } else if (rule == "FoldTwoTrans") {
    auto s = random_shape(rng, rank);
    auto x = b.input("x", f32(s));
    auto t1 = b.transpose(x, random_perm(rng, rank));
    b.output(b.transpose(t1, random_perm(rng, rank)));
  } else if (rule == "FoldNopTrans") {
    auto s = random_shape(rng, rank);
    Shape id(rank);
    std::iota(id.begin(), id.end(), 0);
    b.output(b.transpose(b.input("x", f32(s)), id));
  } else if (rule == "MetaPackOperation") {
    auto op = pick(rng, 0, 2);
    Shape lanes = kLaneChoices[pick(rng, 0, static_cast<std::int64_t>(kLaneChoices.size()) - 1)];
    inst.lanes = lanes;
    if (op == 2) {
      std::int64_t m, k, n;
      if (lanes.size() == 2) {
        m = multiple_of(rng, lanes[0]);
        k = multiple_of(rng, lanes[1]);
        n = multiple_of(rng, lanes[1]);
      } else {
        m = pick(rng, 1, 8);
        k = pick(rng, 1, 8);
        n = multiple_of(rng, lanes[0]);
      }
      auto a = b.input("a", f32({m, k}));
      auto w = b.input("w", f32({k, n}));
      b.output(b.matmul(a, w));
    } else {
      std::size_t r = std::max<std::size_t>(rank, lanes.size());
      auto s = random_shape(rng, r);
      for (std::size_t i = 0; i < lanes.size(); ++i)
        s[r - lanes.size() + i] = multiple_of(rng, lanes[i]);
      auto x = b.input("x", f32(s));
      if (op == 0)
        b.output(b.unary(un, x));
      else
        b.output(b.binary(bin, x, b.input("y", f32(s))));
    }
  } else if (rule == "FoldNopPack") {
    Shape lanes = kLaneChoices[pick(rng, 0, static_cast<std::int64_t>(kLaneChoices.size()) - 1)];
    inst.lanes = lanes;
    std::size_t r = std::max<std::size_t>(rank, lanes.size());
    auto s = random_shape(rng, r);
    Shape axes;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      axes.push_back(static_cast<std::int64_t>(r - lanes.size() + i));
      s[axes.back()] = multiple_of(rng, lanes[i]);
    }
    auto x = b.input("x", f32(s));
    auto p = b.add(OpKind::pack(lanes, axes), {x});
    auto u = b.add(OpKind::unpack(axes), {p});
    b.output(b.add(OpKind::pack(lanes, axes), {u}));
  } else {
    throw Error(ErrorCode::Validation, "no generator for " + rule);
  }
  inst.lhs = b.build();
  return inst;
}

SoundnessResult check_rule_instance(const std::string &rule, const RuleInstance &inst,
                                    std::mt19937_64 &rng) {
  EGraph g;
  auto ids = g.add_graph(inst.lhs);
  EClassId root = ids[inst.lhs.outputs[0]];
  std::size_t before = g.node_count();
  std::size_t changes = apply_all(g, {rule_named(rule, inst.lanes)});
  SoundnessResult res;
  res.rule_fired = changes > 0 || g.node_count() != before;
  auto inputs = random_inputs(inst.lhs, rng);
  auto expected = eval(inst.lhs, inputs)[0];
  res.terms = for_each_selection(
      g, {g.find(root)},
      [&](const Selection &sel) {
        Graph term = term_graph(g, sel, {g.find(root)});
        auto got = eval(term, inputs)[0];
        res.max_error = std::max(res.max_error, max_relative_error(got, expected));
      },
      256);
  return res;
}

} // namespace oracle
