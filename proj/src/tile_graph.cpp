// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/tile_graph.hpp"

#include "minicase/error.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace minicase {

namespace {

const char *const kVarNames[] = {"i", "k", "l", "j", "m", "n", "p", "q", "r", "s", "t", "u", "v", "w"};

std::string var_name(std::size_t index) {
  constexpr std::size_t named = sizeof(kVarNames) / sizeof(kVarNames[0]);
  if (index < named)
    return kVarNames[index];
  return "x" + std::to_string(index - named);
}

struct UnionFind {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x)
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b)
      parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

[[noreturn]] void illegal(const std::string &msg) { throw Error(ErrorCode::IllegalMerge, msg); }

std::string join_loops(const TieredTileGraph &s, const std::vector<int> &loops, int level) {
  std::string out;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (i)
      out += ",";
    out += s.var_names[static_cast<std::size_t>(loops[i])] + "^" + std::to_string(level);
  }
  return out;
}

// Node-level dependency edges among the nodes at `level`.
std::map<int, std::set<int>> node_edges(const TieredTileGraph &s, int level) {
  std::map<int, std::set<int>> edges;
  for (std::size_t c = 0; c < s.ops.size(); ++c) {
    int to = s.node_of(static_cast<int>(c), level);
    for (auto in : s.ops[c].inputs) {
      int p = s.producer_of(in);
      if (p < 0)
        continue;
      int from = s.node_of(p, level);
      if (from != to)
        edges[from].insert(to);
    }
  }
  return edges;
}

bool has_cycle(const std::map<int, std::set<int>> &edges, const std::vector<int> &nodes) {
  std::map<int, int> state; // 0 new, 1 on stack, 2 done
  std::function<bool(int)> visit = [&](int n) {
    state[n] = 1;
    if (auto it = edges.find(n); it != edges.end())
      for (int m : it->second) {
        if (state[m] == 1)
          return true;
        if (state[m] == 0 && visit(m))
          return true;
      }
    state[n] = 2;
    return false;
  };
  for (int n : nodes)
    if (state[n] == 0 && visit(n))
      return true;
  return false;
}

// Children sorted so producers precede consumers; ties by id.
std::vector<int> topo_children(const TieredTileGraph &s, int level, std::vector<int> kids) {
  auto edges = node_edges(s, level);
  std::set<int> pending(kids.begin(), kids.end());
  std::vector<int> out;
  while (!pending.empty()) {
    bool progressed = false;
    for (int k : pending) {
      bool ready = true;
      for (int other : pending)
        if (other != k && edges.count(other) && edges.at(other).count(k))
          ready = false;
      if (ready) {
        out.push_back(k);
        pending.erase(k);
        progressed = true;
        break;
      }
    }
    if (!progressed)
      illegal("merge would create a dependency cycle");
  }
  return out;
}

} // namespace

std::vector<int> TileOp::reduction_vars() const {
  std::vector<int> r;
  for (int v : vars)
    if (std::find(out_axes.begin(), out_axes.end(), v) == out_axes.end())
      r.push_back(v);
  return r;
}

bool TileOp::uses(int var) const { return std::find(vars.begin(), vars.end(), var) != vars.end(); }

int TieredTileGraph::node_of(int op, int level) const {
  for (const auto &[id, n] : levels.at(static_cast<std::size_t>(level))) {
    auto under = ops_under(level, id);
    if (std::find(under.begin(), under.end(), op) != under.end())
      return id;
  }
  throw Error(ErrorCode::Internal, "operator not found in tile graph");
}

std::vector<int> TieredTileGraph::ops_under(int level, int id) const {
  if (level == 0)
    return {id};
  std::vector<int> out;
  for (int c : node(level, id).children) {
    auto sub = ops_under(level - 1, c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> TieredTileGraph::relation(int level, int id) const {
  const auto &child = node(level, id);
  std::vector<int> r(child.loops.size(), -1);
  if (level + 1 >= num_levels)
    return r;
  const auto &parent = node(level + 1, node_of(ops_under(level, id).front(), level + 1));
  for (std::size_t i = 0; i < child.loops.size(); ++i) {
    auto it = std::find(parent.loops.begin(), parent.loops.end(), child.loops[i]);
    if (it != parent.loops.end())
      r[i] = static_cast<int>(it - parent.loops.begin());
  }
  return r;
}

int TieredTileGraph::producer_of(NodeId n) const {
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (ops[i].node == n)
      return static_cast<int>(i);
  return -1;
}

std::string TieredTileGraph::to_string() const {
  std::ostringstream os;
  for (int lvl = 0; lvl < num_levels; ++lvl) {
    os << "Level " << lvl << ":";
    bool first = true;
    for (const auto &[id, n] : levels[static_cast<std::size_t>(lvl)]) {
      os << (first ? " " : ", ") << "Op_" << id << "^" << lvl << "={" << join_loops(*this, n.loops, lvl)
         << "}(";
      if (lvl == 0) {
        os << op_name(ops[static_cast<std::size_t>(id)].kind.op);
      } else {
        for (std::size_t c = 0; c < n.children.size(); ++c)
          os << (c ? "," : "") << "Op_" << n.children[c] << "^" << (lvl - 1);
      }
      os << ")";
      first = false;
    }
    os << "\n";
  }
  return os.str();
}

std::string TieredTileGraph::key() const {
  std::ostringstream os;
  for (int lvl = 1; lvl < num_levels; ++lvl) {
    os << lvl << ":";
    for (const auto &[id, n] : levels[static_cast<std::size_t>(lvl)]) {
      os << id << "[";
      for (int v : n.loops)
        os << v << ",";
      os << "](";
      for (int c : n.children)
        os << c << ",";
      os << ")";
    }
    os << ";";
  }
  return os.str();
}

TieredTileGraph init_tile_graph(const Graph &subgraph, int num_levels) {
  if (num_levels < 2)
    throw Error(ErrorCode::Validation, "a tile graph needs at least two levels");
  TieredTileGraph s;
  s.graph = subgraph;
  s.num_levels = num_levels;

  UnionFind uf;
  std::vector<std::int64_t> raw_extent;
  std::map<NodeId, std::vector<int>> axes; // raw variable per tensor axis
  auto axes_of = [&](NodeId id) -> std::vector<int> & {
    auto it = axes.find(id);
    if (it != axes.end())
      return it->second;
    std::vector<int> v;
    for (auto d : subgraph.node(id).type.shape) {
      v.push_back(uf.make());
      raw_extent.push_back(d);
    }
    return axes[id] = v;
  };

  std::vector<TileOp> raw;
  for (const auto &n : subgraph.nodes) {
    if (n.kind.op == Op::Input || n.kind.op == Op::Constant)
      continue;
    if (n.type.is_packed())
      throw Error(ErrorCode::Validation, "scheduling needs unpacked tensors");
    for (auto in : n.inputs)
      if (subgraph.node(in).type.is_packed())
        throw Error(ErrorCode::Validation, "scheduling needs unpacked tensors");
    TileOp op;
    op.node = n.id;
    op.kind = n.kind;
    op.inputs = n.inputs;
    switch (n.kind.op) {
    case Op::MatMul: {
      auto a = axes_of(n.inputs[0]);
      auto b = axes_of(n.inputs[1]);
      uf.unite(a[1], b[0]);
      op.vars = {a[0], a[1], b[1]};
      op.operand_axes = {a, b};
      op.out_axes = {a[0], b[1]};
      break;
    }
    case Op::Unary:
    case Op::Binary: {
      auto a = axes_of(n.inputs[0]);
      op.operand_axes.push_back(a);
      if (n.kind.op == Op::Binary) {
        auto b = axes_of(n.inputs[1]);
        for (std::size_t d = 0; d < a.size(); ++d)
          uf.unite(a[d], b[d]);
        op.operand_axes.push_back(b);
      }
      op.vars = a;
      op.out_axes = a;
      break;
    }
    default:
      throw Error(ErrorCode::Validation,
                  std::string("operator not supported by the scheduler: ") + op_name(n.kind.op));
    }
    axes[n.id] = op.out_axes;
    raw.push_back(std::move(op));
  }
  if (raw.empty())
    throw Error(ErrorCode::Validation, "subgraph has no compute operators");

  // Dense variable ids in order of first appearance in loop order.
  std::map<int, int> dense;
  for (const auto &op : raw)
    for (int v : op.vars) {
      int root = uf.find(v);
      if (!dense.count(root)) {
        int id = static_cast<int>(dense.size());
        dense[root] = id;
        s.var_names.push_back(var_name(static_cast<std::size_t>(id)));
        s.var_extent.push_back(raw_extent[static_cast<std::size_t>(v)]);
      }
    }
  auto remap = [&](std::vector<int> &vs) {
    for (auto &v : vs)
      v = dense.at(uf.find(v));
  };
  for (auto &op : raw) {
    remap(op.vars);
    remap(op.out_axes);
    for (auto &a : op.operand_axes)
      remap(a);
  }
  for (const auto &op : raw) {
    std::set<int> distinct(op.vars.begin(), op.vars.end());
    if (distinct.size() != op.vars.size())
      throw Error(ErrorCode::Validation, "operator reuses one iteration variable for two loops");
  }
  s.ops = std::move(raw);

  s.levels.resize(static_cast<std::size_t>(num_levels));
  for (std::size_t i = 0; i < s.ops.size(); ++i) {
    int id = static_cast<int>(i);
    s.levels[0][id] = TileNode{id, 0, {}, {}};
    for (int lvl = 1; lvl < num_levels; ++lvl)
      s.levels[static_cast<std::size_t>(lvl)][id] = TileNode{id, lvl, s.ops[i].vars, {id}};
  }
  return s;
}

TieredTileGraph merge(const TieredTileGraph &s, int src, int dst, int level) {
  if (level < 1 || level >= s.num_levels)
    illegal("merge level out of range");
  const auto &lv = s.levels[static_cast<std::size_t>(level)];
  if (src == dst || !lv.count(src) || !lv.count(dst))
    illegal("merge needs two distinct nodes at level " + std::to_string(level));

  auto src_ops = s.ops_under(level, src);
  auto dst_ops = s.ops_under(level, dst);
  for (int m = level + 1; m < s.num_levels; ++m)
    if (s.node_of(src_ops.front(), m) != s.node_of(dst_ops.front(), m))
      illegal("nodes are not fused at level " + std::to_string(m));

  bool feeds = false;
  for (int c : dst_ops)
    for (auto in : s.ops[static_cast<std::size_t>(c)].inputs) {
      int p = s.producer_of(in);
      if (p >= 0 && std::find(src_ops.begin(), src_ops.end(), p) != src_ops.end())
        feeds = true;
    }
  if (!feeds)
    illegal("Op_" + std::to_string(src) + " does not feed Op_" + std::to_string(dst));

  TieredTileGraph out = s;
  auto &olv = out.levels[static_cast<std::size_t>(level)];
  auto &target = olv.at(dst);
  std::vector<int> kids = target.children;
  const auto &moved = olv.at(src).children;
  kids.insert(kids.end(), moved.begin(), moved.end());
  olv.erase(src);
  // Temporarily record membership so dependency queries see the merge.
  target.children = kids;
  if (level + 1 < out.num_levels) {
    auto &parent = out.levels[static_cast<std::size_t>(level + 1)].at(s.node_of(dst_ops.front(), level + 1));
    parent.children.erase(std::remove(parent.children.begin(), parent.children.end(), src),
                          parent.children.end());
  }

  std::vector<int> nodes;
  for (const auto &[id, n] : olv)
    nodes.push_back(id);
  if (has_cycle(node_edges(out, level), nodes))
    illegal("merge would create a dependency cycle");
  target.children = topo_children(out, level - 1, kids);

  // A loop of the fused node may not split a reduction whose result is read
  // by another operator inside the node.
  auto merged_ops = out.ops_under(level, dst);
  for (int o : merged_ops) {
    const auto &op = out.ops[static_cast<std::size_t>(o)];
    bool consumed_inside = false;
    for (int c : merged_ops)
      for (auto in : out.ops[static_cast<std::size_t>(c)].inputs)
        if (in == op.node)
          consumed_inside = true;
    if (!consumed_inside)
      continue;
    for (int r : op.reduction_vars())
      if (std::find(target.loops.begin(), target.loops.end(), r) != target.loops.end())
        illegal("loop " + out.var_names[static_cast<std::size_t>(r)] + " would split the reduction of Op_" +
                std::to_string(o));
  }
  return out;
}

TieredTileGraph reorder(const TieredTileGraph &s, int id, int level, const std::vector<int> &loops) {
  if (level < 1 || level >= s.num_levels || !s.levels[static_cast<std::size_t>(level)].count(id))
    throw Error(ErrorCode::BadPermutation, "no node Op_" + std::to_string(id) + "^" + std::to_string(level));
  auto current = s.node(level, id).loops;
  auto a = current, b = loops;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b)
    throw Error(ErrorCode::BadPermutation, "loop order is not a permutation of the node's loops");
  TieredTileGraph out = s;
  out.levels[static_cast<std::size_t>(level)].at(id).loops = loops;
  return out;
}

std::string ScheduleAction::to_string() const {
  std::ostringstream os;
  if (kind == Kind::Merge) {
    os << "merge(" << src << "," << dst << "," << level << ")";
  } else {
    os << "reorder(" << node << "," << level << ",[";
    for (std::size_t i = 0; i < loops.size(); ++i)
      os << (i ? "," : "") << loops[i];
    os << "])";
  }
  return os.str();
}

TieredTileGraph apply_action(const TieredTileGraph &s, const ScheduleAction &a) {
  if (a.kind == ScheduleAction::Kind::Merge)
    return merge(s, a.src, a.dst, a.level);
  return reorder(s, a.node, a.level, a.loops);
}

std::vector<ScheduleAction> legal_actions(const TieredTileGraph &s, std::size_t max_reorder_loops) {
  std::vector<ScheduleAction> out;
  std::set<std::string> seen{s.key()};
  auto consider = [&](const ScheduleAction &a) {
    try {
      auto next = apply_action(s, a);
      if (seen.insert(next.key()).second)
        out.push_back(a);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::IllegalMerge && e.code() != ErrorCode::BadPermutation)
        throw;
    }
  };
  for (int lvl = s.num_levels - 1; lvl >= 1; --lvl) {
    auto edges = node_edges(s, lvl);
    for (const auto &[from, tos] : edges)
      for (int to : tos) {
        ScheduleAction a;
        a.kind = ScheduleAction::Kind::Merge;
        a.src = from;
        a.dst = to;
        a.level = lvl;
        consider(a);
      }
  }
  for (int lvl = s.num_levels - 1; lvl >= 1; --lvl)
    for (const auto &[id, n] : s.levels[static_cast<std::size_t>(lvl)]) {
      if (n.loops.size() < 2 || n.loops.size() > max_reorder_loops)
        continue;
      auto perm = n.loops;
      std::sort(perm.begin(), perm.end());
      do {
        if (perm == n.loops)
          continue;
        ScheduleAction a;
        a.kind = ScheduleAction::Kind::Reorder;
        a.node = id;
        a.level = lvl;
        a.loops = perm;
        consider(a);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  return out;
}

} // namespace minicase
