// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/rewrite_rules.hpp"

#include "minicase/error.hpp"

#include <sstream>

namespace minicase {

namespace {

template <typename Fn> void for_each_node(const EGraph &g, Fn &&fn) {
  for (auto id : g.class_ids())
    for (const auto &n : g.eclass(id).nodes)
      fn(id, n);
}

template <typename Fn> void for_each_transpose(const EGraph &g, EClassId cls, Fn &&fn) {
  for (const auto &n : g.eclass(cls).nodes)
    if (n.kind.op == Op::Transpose)
      fn(n);
}

Rule combine_binary_left() {
  return {"CombineBinaryLeftTrans", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op != Op::Binary || n.sbp)
                return;
              auto fn = n.kind.binary;
              EClassId y = n.children[1];
              for_each_transpose(g, n.children[0], [&](const ENode &t) {
                Shape perm = t.kind.perm;
                EClassId a = t.children[0];
                out.push_back({root, [=](EGraph &eg) {
                                 auto ty = eg.add(OpKind::transpose(invert_permutation(perm)), {y});
                                 auto bin = eg.add(OpKind::binary_op(fn), {a, ty});
                                 return eg.add(OpKind::transpose(perm), {bin});
                               }});
              });
            });
            return out;
          }};
}

Rule combine_binary_right() {
  return {"CombineBinaryRightTrans", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op != Op::Binary || n.sbp)
                return;
              auto fn = n.kind.binary;
              EClassId x = n.children[0];
              for_each_transpose(g, n.children[1], [&](const ENode &t) {
                Shape perm = t.kind.perm;
                EClassId b = t.children[0];
                out.push_back({root, [=](EGraph &eg) {
                                 auto tx = eg.add(OpKind::transpose(invert_permutation(perm)), {x});
                                 auto bin = eg.add(OpKind::binary_op(fn), {tx, b});
                                 return eg.add(OpKind::transpose(perm), {bin});
                               }});
              });
            });
            return out;
          }};
}

Rule combine_unary() {
  return {"CombineUnaryTrans", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op != Op::Unary || n.sbp)
                return;
              auto fn = n.kind.unary;
              for_each_transpose(g, n.children[0], [&](const ENode &t) {
                Shape perm = t.kind.perm;
                EClassId a = t.children[0];
                out.push_back({root, [=](EGraph &eg) {
                                 auto u = eg.add(OpKind::unary_op(fn), {a});
                                 return eg.add(OpKind::transpose(perm), {u});
                               }});
              });
            });
            return out;
          }};
}

Rule fold_two() {
  return {"FoldTwoTrans", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op != Op::Transpose)
                return;
              Shape outer = n.kind.perm;
              for_each_transpose(g, n.children[0], [&](const ENode &t) {
                Shape composed = compose_permutations(t.kind.perm, outer);
                EClassId a = t.children[0];
                out.push_back({root, [=](EGraph &eg) {
                                 return eg.add(OpKind::transpose(composed), {a});
                               }});
              });
            });
            return out;
          }};
}

Rule fold_nop() {
  return {"FoldNopTrans", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op == Op::Transpose && is_identity_permutation(n.kind.perm)) {
                EClassId a = n.children[0];
                out.push_back({root, [=](EGraph &eg) { return eg.find(a); }});
              }
            });
            return out;
          }};
}

// Axes and lanes used to pack one operand, or nullopt when the lane option
// does not divide the operand exactly.
struct PackPlan {
  Shape lanes;
  Shape axes;
};

std::optional<PackPlan> plan_pack(const TensorType &t, const Shape &lanes, const Shape &axes) {
  if (t.is_packed() || axes.empty())
    return std::nullopt;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || static_cast<std::size_t>(axes[i]) >= t.rank())
      return std::nullopt;
    if (t.shape[axes[i]] % lanes[i] != 0)
      return std::nullopt;
  }
  return PackPlan{lanes, axes};
}

Shape trailing_axes(std::size_t rank, std::size_t count) {
  Shape axes;
  for (std::size_t i = rank - count; i < rank; ++i)
    axes.push_back(static_cast<std::int64_t>(i));
  return axes;
}

Rule meta_pack(const VectorizeConfig &config) {
  std::vector<Shape> options;
  for (const auto &l : config.lane_options)
    if (!l.empty() && l.size() <= config.max_pack_rank)
      options.push_back(l);
  return {"MetaPackOperation", [options](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              const auto op = n.kind.op;
              if ((op != Op::Unary && op != Op::Binary && op != Op::MatMul) || n.sbp)
                return;
              if (g.eclass(root).type.is_packed())
                return;
              std::vector<TensorType> in;
              for (auto c : n.children)
                in.push_back(g.eclass(c).type);
              for (const auto &lanes : options) {
                std::vector<std::optional<PackPlan>> plans;
                Shape out_axes;
                if (op == Op::MatMul) {
                  if (lanes.size() == 2) {
                    plans.push_back(plan_pack(in[0], {lanes[0], lanes[1]}, {0, 1}));
                    plans.push_back(plan_pack(in[1], {lanes[1], lanes[1]}, {0, 1}));
                    out_axes = {0, 1};
                  } else {
                    plans.push_back(std::nullopt);
                    plans.push_back(plan_pack(in[1], lanes, {1}));
                    out_axes = {1};
                    if (!plans[1])
                      continue;
                  }
                } else {
                  if (in[0].rank() < lanes.size())
                    continue;
                  out_axes = trailing_axes(in[0].rank(), lanes.size());
                  for (const auto &t : in)
                    plans.push_back(plan_pack(t, lanes, out_axes));
                }
                bool ok = true;
                for (std::size_t i = 0; i < plans.size(); ++i)
                  if (!plans[i] && !(op == Op::MatMul && lanes.size() == 1 && i == 0))
                    ok = false;
                if (!ok)
                  continue;
                OpKind kind = n.kind;
                auto children = n.children;
                out.push_back({root, [=](EGraph &eg) {
                                 std::vector<EClassId> packed;
                                 for (std::size_t i = 0; i < children.size(); ++i)
                                   packed.push_back(
                                       plans[i] ? eg.add(OpKind::pack(plans[i]->lanes,
                                                                      plans[i]->axes),
                                                         {children[i]})
                                                : children[i]);
                                 auto body = eg.add(kind, packed);
                                 return eg.add(OpKind::unpack(out_axes), {body});
                               }});
              }
            });
            return out;
          }};
}

Rule fold_nop_pack() {
  return {"FoldNopPack", [](const EGraph &g) {
            std::vector<RuleMatch> out;
            for_each_node(g, [&](EClassId root, const ENode &n) {
              if (n.kind.op != Op::Pack)
                return;
              const auto &target = g.eclass(root);
              for (const auto &u : g.eclass(n.children[0]).nodes) {
                if (u.kind.op != Op::Unpack || u.kind.axes != n.kind.axes)
                  continue;
                const auto &src = g.eclass(u.children[0]);
                if (!(src.type == target.type) || !(src.sbp == target.sbp))
                  continue;
                EClassId y = u.children[0];
                out.push_back({root, [=](EGraph &eg) { return eg.find(y); }});
              }
            });
            return out;
          }};
}

// Graph-level versions of the transpose rules for destructive rewriting.
// Each returns the replacement node id in `b`, or nullopt when `id` does not
// match.
using GraphRule = std::optional<NodeId> (*)(GraphBuilder &b, NodeId id);

std::optional<NodeId> g_combine_left(GraphBuilder &b, NodeId id) {
  const auto n = b.graph().node(id);
  if (n.kind.op != Op::Binary)
    return std::nullopt;
  const auto x = b.graph().node(n.inputs[0]);
  if (x.kind.op != Op::Transpose)
    return std::nullopt;
  auto ty = b.transpose(n.inputs[1], invert_permutation(x.kind.perm));
  auto bin = b.binary(n.kind.binary, x.inputs[0], ty);
  return b.transpose(bin, x.kind.perm);
}

std::optional<NodeId> g_combine_right(GraphBuilder &b, NodeId id) {
  const auto n = b.graph().node(id);
  if (n.kind.op != Op::Binary)
    return std::nullopt;
  const auto y = b.graph().node(n.inputs[1]);
  if (y.kind.op != Op::Transpose)
    return std::nullopt;
  auto tx = b.transpose(n.inputs[0], invert_permutation(y.kind.perm));
  auto bin = b.binary(n.kind.binary, tx, y.inputs[0]);
  return b.transpose(bin, y.kind.perm);
}

std::optional<NodeId> g_combine_unary(GraphBuilder &b, NodeId id) {
  const auto n = b.graph().node(id);
  if (n.kind.op != Op::Unary)
    return std::nullopt;
  const auto x = b.graph().node(n.inputs[0]);
  if (x.kind.op != Op::Transpose)
    return std::nullopt;
  auto u = b.unary(n.kind.unary, x.inputs[0]);
  return b.transpose(u, x.kind.perm);
}

std::optional<NodeId> g_fold_two(GraphBuilder &b, NodeId id) {
  const auto n = b.graph().node(id);
  if (n.kind.op != Op::Transpose)
    return std::nullopt;
  const auto x = b.graph().node(n.inputs[0]);
  if (x.kind.op != Op::Transpose)
    return std::nullopt;
  return b.transpose(x.inputs[0], compose_permutations(x.kind.perm, n.kind.perm));
}

std::optional<NodeId> g_fold_nop(GraphBuilder &b, NodeId id) {
  const auto &n = b.graph().node(id);
  if (n.kind.op != Op::Transpose || !is_identity_permutation(n.kind.perm))
    return std::nullopt;
  return n.inputs[0];
}

GraphRule graph_rule(const std::string &name) {
  if (name == "CombineBinaryLeftTrans") return g_combine_left;
  if (name == "CombineBinaryRightTrans") return g_combine_right;
  if (name == "CombineUnaryTrans") return g_combine_unary;
  if (name == "FoldTwoTrans") return g_fold_two;
  if (name == "FoldNopTrans") return g_fold_nop;
  throw Error(ErrorCode::Validation, "no destructive form for rule '" + name + "'");
}

// One bottom-up pass; returns the rewritten graph and whether anything fired.
std::pair<Graph, bool> sweep(const Graph &g, GraphRule rule) {
  GraphBuilder b;
  std::vector<NodeId> map(g.size());
  bool fired = false;
  for (const auto &node : g.nodes) {
    std::vector<NodeId> inputs;
    for (auto in : node.inputs)
      inputs.push_back(map[in]);
    NodeId id = b.add(node.kind, inputs);
    if (auto r = rule(b, id)) {
      id = *r;
      fired = true;
    }
    map[node.id] = id;
  }
  Graph out = b.build();
  out.inputs.clear();
  for (auto in : g.inputs)
    out.inputs.push_back(map[in]);
  for (auto o : g.outputs)
    out.outputs.push_back(map[o]);
  out.placement = g.placement;
  return {compact(out), fired};
}

} // namespace

Shape compose_permutations(const Shape &inner, const Shape &outer) {
  if (inner.size() != outer.size())
    throw Error(ErrorCode::TypeError, "cannot compose permutations of different rank");
  Shape out(outer.size());
  for (std::size_t i = 0; i < outer.size(); ++i)
    out[i] = inner[outer[i]];
  return out;
}

RuleSet rules_transpose() {
  return {combine_binary_left(), combine_binary_right(), combine_unary(), fold_two(),
          fold_nop()};
}

RuleSet rules_vectorize(const VectorizeConfig &config) {
  if (config.lane_options.empty())
    throw Error(ErrorCode::Validation, "vectorize needs at least one lane option");
  return {meta_pack(config), fold_nop_pack()};
}

RuleSet rules_by_name(const std::string &families, const VectorizeConfig &config) {
  RuleSet out;
  std::stringstream ss(families);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty())
      continue;
    RuleSet part;
    if (item == "transpose")
      part = rules_transpose();
    else if (item == "vectorize")
      part = rules_vectorize(config);
    else
      throw Error(ErrorCode::Validation, "unknown rule family '" + item + "'");
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

Graph rewrite_greedy(const Graph &g, const std::vector<std::string> &order) {
  Graph cur = g;
  for (const auto &name : order) {
    GraphRule rule = graph_rule(name);
    for (int pass = 0; pass < 64; ++pass) {
      auto [next, fired] = sweep(cur, rule);
      cur = std::move(next);
      if (!fired)
        break;
    }
  }
  return cur;
}

} // namespace minicase
