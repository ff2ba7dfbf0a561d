// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "support/oracles.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace oracle {

namespace {

bool selection_acyclic(const EGraph &g, const Selection &sel, const std::vector<EClassId> &roots) {
  std::map<EClassId, int> state; // 1 = on stack, 2 = done
  std::function<bool(EClassId)> dfs = [&](EClassId c) {
    c = g.find(c);
    auto &s = state[c];
    if (s == 1)
      return false;
    if (s == 2)
      return true;
    s = 1;
    for (auto ch : sel.at(c).children)
      if (!dfs(ch))
        return false;
    state[c] = 2;
    return true;
  };
  for (auto r : roots)
    if (!dfs(r))
      return false;
  return true;
}

} // namespace

std::size_t for_each_selection(const EGraph &g, const std::vector<EClassId> &roots,
                               const std::function<void(const Selection &)> &fn,
                               std::size_t limit) {
  Selection sel;
  std::set<EClassId> pending;
  for (auto r : roots)
    pending.insert(g.find(r));
  std::size_t visited = 0;

  std::function<void()> rec = [&]() {
    if (visited >= limit)
      return;
    if (pending.empty()) {
      if (selection_acyclic(g, sel, roots)) {
        ++visited;
        fn(sel);
      }
      return;
    }
    EClassId c = *pending.begin();
    pending.erase(pending.begin());
    for (const auto &n : g.eclass(c).nodes) {
      ENode canon = n;
      for (auto &ch : canon.children)
        ch = g.find(ch);
      sel[c] = canon;
      std::vector<EClassId> added;
      for (auto ch : canon.children)
        if (!sel.count(ch) && pending.insert(ch).second)
          added.push_back(ch);
      rec();
      for (auto ch : added)
        pending.erase(ch);
      sel.erase(c);
    }
    pending.insert(c);
  };
  rec();
  return visited;
}

BruteExtraction brute_force_extract(const EGraph &g, const std::vector<EClassId> &roots,
                                    const NodeCostFn &cost) {
  BruteExtraction best;
  best.cost = std::numeric_limits<double>::infinity();
  best.terms = for_each_selection(g, roots, [&](const Selection &sel) {
    // Sum over used classes in ascending id.
    std::set<EClassId> used;
    std::vector<EClassId> stack(roots.begin(), roots.end());
    while (!stack.empty()) {
      auto c = g.find(stack.back());
      stack.pop_back();
      if (!used.insert(c).second)
        continue;
      for (auto ch : sel.at(c).children)
        stack.push_back(ch);
    }
    double total = 0.0;
    for (auto c : used)
      total += cost(g, c, sel.at(c));
    if (total < best.cost) {
      best.cost = total;
      best.selection = sel;
      best.found = true;
    }
  });
  return best;
}

Graph term_graph(const EGraph &g, const Selection &sel, const std::vector<EClassId> &roots) {
  GraphBuilder b;
  std::map<EClassId, NodeId> built;
  std::vector<NodeId> inputs;
  std::function<NodeId(EClassId)> go = [&](EClassId c) -> NodeId {
    c = g.find(c);
    if (auto it = built.find(c); it != built.end())
      return it->second;
    const auto &n = sel.at(c);
    std::vector<NodeId> ins;
    for (auto ch : n.children)
      ins.push_back(go(ch));
    auto id = b.add(n.kind, ins, n.sbp);
    if (n.kind.op == Op::Input)
      inputs.push_back(id);
    built[c] = id;
    return id;
  };
  std::vector<NodeId> outs;
  for (auto r : roots)
    outs.push_back(go(r));
  Graph out = b.build();
  out.inputs = inputs;
  out.outputs = outs;
  return out;
}

Shape compose_by_action(const Shape &inner, const Shape &outer, const Shape &shape) {
  TensorType t(DataType::F32, shape);
  std::vector<float> iota(static_cast<std::size_t>(product(shape)));
  std::iota(iota.begin(), iota.end(), 0.0f);
  TensorValue a(t, iota);
  auto twice = apply_op(OpKind::transpose(outer), {apply_op(OpKind::transpose(inner), {a})});
  Shape q(shape.size());
  std::iota(q.begin(), q.end(), 0);
  do {
    auto once = apply_op(OpKind::transpose(q), {a});
    if (once.type == twice.type && once.data == twice.data)
      return q;
  } while (std::next_permutation(q.begin(), q.end()));
  return {};
}

std::int64_t brute_force_footprint(const std::vector<BufferRecord> &buffers,
                                   std::int64_t alignment) {
  struct It {
    std::int64_t size, first, last;
  };
  std::vector<It> items;
  for (const auto &b : buffers)
    if (!b.alias_of && b.size > 0) {
      auto s = alignment > 1 ? (b.size + alignment - 1) / alignment * alignment : b.size;
      items.push_back({s, b.first, b.last});
    }
  const int n = static_cast<int>(items.size());
  if (n == 0)
    return 0;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (items[i].first <= items[j].last && items[j].first <= items[i].last)
        pairs.emplace_back(i, j);

  // below[u][v]: u sits below v.
  std::vector<std::vector<bool>> below(n, std::vector<bool>(n, false));
  auto reaches = [&](int from, int to) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{from};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == to)
        return true;
      if (seen[u])
        continue;
      seen[u] = true;
      for (int v = 0; v < n; ++v)
        if (below[u][v])
          stack.push_back(v);
    }
    return false;
  };
  auto height = [&]() {
    std::vector<std::int64_t> off(n, 0);
    for (int round = 0; round < n; ++round)
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
          if (below[u][v])
            off[v] = std::max(off[v], off[u] + items[u].size);
    std::int64_t h = 0;
    for (int u = 0; u < n; ++u)
      h = std::max(h, off[u] + items[u].size);
    return h;
  };

  std::int64_t best = 0;
  for (const auto &it : items)
    best += it.size;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (height() >= best && k > 0)
      return;
    if (k == pairs.size()) {
      best = std::min(best, height());
      return;
    }
    auto [i, j] = pairs[k];
    for (int dir = 0; dir < 2; ++dir) {
      int u = dir == 0 ? i : j, v = dir == 0 ? j : i;
      if (reaches(v, u))
        continue;
      below[u][v] = true;
      rec(k + 1);
      below[u][v] = false;
    }
  };
  rec(0);
  return best;
}

std::vector<int> congruence_closure(const std::vector<std::pair<int, std::vector<int>>> &terms,
                                    const std::vector<std::pair<int, int>> &equalities) {
  std::vector<int> parent(terms.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b)
      return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  };
  for (auto [a, b] : equalities)
    unite(a, b);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < terms.size(); ++i)
      for (std::size_t j = i + 1; j < terms.size(); ++j) {
        if (terms[i].first != terms[j].first ||
            terms[i].second.size() != terms[j].second.size() || terms[i].second.empty())
          continue;
        bool same = true;
        for (std::size_t k = 0; k < terms[i].second.size(); ++k)
          if (find(terms[i].second[k]) != find(terms[j].second[k]))
            same = false;
        if (same && unite(static_cast<int>(i), static_cast<int>(j)))
          changed = true;
      }
  }
  std::vector<int> out(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    out[i] = find(static_cast<int>(i));
  return out;
}

} // namespace oracle

namespace oracle {

namespace {

std::string cost_key(const EGraph &g, const ENode &n) {
  ENode c = n;
  for (auto &ch : c.children)
    ch = g.find(ch);
  return c.to_string();
}

} // namespace

NodeCostFn RandomEGraph::cost() const {
  auto table = costs;
  return [table](const EGraph &g, EClassId, const ENode &n) { return table->at(cost_key(g, n)); };
}

RandomEGraph random_egraph(std::mt19937_64 &rng, int max_classes, int max_nodes) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RandomEGraph out;
  EGraph &g = out.graph;
  const int n = pick(2, max_classes);
  const OpKind unary[] = {OpKind::unary_op(UnaryFn::Neg), OpKind::unary_op(UnaryFn::Exp),
                          OpKind::unary_op(UnaryFn::Abs)};
  const OpKind binary[] = {OpKind::binary_op(BinaryFn::Add), OpKind::binary_op(BinaryFn::Mul),
                           OpKind::binary_op(BinaryFn::Sub)};
  auto random_op = [&](int limit) {
    ENode node;
    if (pick(0, 1) == 0) {
      node.kind = unary[pick(0, 2)];
      node.children = {pick(0, limit - 1)};
    } else {
      node.kind = binary[pick(0, 2)];
      node.children = {pick(0, limit - 1), pick(0, limit - 1)};
    }
    return node;
  };

  // First node of class i only uses classes below i, so every class has an
  // acyclic derivation.
  std::vector<EClassId> ids;
  for (int i = 0; i < n; ++i) {
    if (i < 2 || pick(0, 3) == 0) {
      ids.push_back(g.add(OpKind::input("x" + std::to_string(i), DataType::F32, {2}), {}));
    } else {
      ENode node = random_op(i);
      for (auto &c : node.children)
        c = ids[c];
      if (g.lookup(node))
        node = ENode{OpKind::input("x" + std::to_string(i), DataType::F32, {2}), {}, {}};
      ids.push_back(g.add(node));
    }
  }
  for (int i = 0; i < n; ++i) {
    int extra = pick(0, max_nodes - 1);
    for (int e = 0; e < extra; ++e) {
      ENode node = random_op(n);
      for (auto &c : node.children)
        c = ids[c];
      if (g.lookup(node))
        continue;
      auto id = g.add(node);
      g.merge(id, ids[i]);
    }
  }
  g.rebuild();
  out.root = g.find(ids.back());
  out.costs = std::make_shared<std::map<std::string, double>>();
  for (auto id : g.class_ids())
    for (const auto &node : g.eclass(id).nodes)
      (*out.costs)[cost_key(g, node)] = static_cast<double>(pick(0, 9));
  return out;
}

} // namespace oracle
