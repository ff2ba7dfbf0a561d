// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/egraph.hpp"

#include "minicase/error.hpp"
#include "minicase/log.hpp"

#include <algorithm>
#include <sstream>

namespace minicase {

std::size_t ENode::hash() const {
  std::size_t h = kind.hash();
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
  for (auto c : children)
    mix(std::hash<EClassId>()(c));
  if (sbp)
    for (const auto &e : sbp->entries)
      mix(static_cast<std::size_t>(e.kind) * 31 + static_cast<std::size_t>(e.axis) + 7);
  return h;
}

std::string ENode::to_string() const {
  std::ostringstream os;
  os << kind.to_string();
  if (sbp)
    os << sbp->to_string();
  os << "(";
  for (std::size_t i = 0; i < children.size(); ++i)
    os << (i ? ", " : "") << "e" << children[i];
  os << ")";
  return os.str();
}

EClassId EGraph::find(EClassId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= parent_.size())
    throw Error(ErrorCode::Internal, "unknown e-class id " + std::to_string(id));
  while (parent_[id] != id) {
    parent_[id] = parent_[parent_[id]];
    id = parent_[id];
  }
  return id;
}

ENode EGraph::canonicalize(ENode n) const {
  for (auto &c : n.children)
    c = find(c);
  return n;
}

EClassId EGraph::add(ENode n) {
  n = canonicalize(std::move(n));
  if (auto it = memo_.find(n); it != memo_.end())
    return find(it->second);

  std::vector<TensorType> child_types;
  child_types.reserve(n.children.size());
  for (auto c : n.children)
    child_types.push_back(classes_[c].type);
  TensorType type = infer_type(n.kind, child_types);

  std::optional<NdSbp> sbp = n.sbp;
  if (n.kind.op == Op::Boxing)
    sbp = n.kind.box_target;

  EClassId id = static_cast<EClassId>(classes_.size());
  EClass cls;
  cls.id = id;
  cls.type = std::move(type);
  cls.sbp = std::move(sbp);
  cls.nodes.push_back(n);
  classes_.push_back(std::move(cls));
  parent_.push_back(id);
  memo_.emplace(std::move(n), id);
  return id;
}

std::vector<EClassId> EGraph::add_graph(const Graph &g) {
  std::vector<EClassId> ids(g.size());
  for (const auto &node : g.nodes) {
    ENode n{node.kind, {}, node.sbp};
    for (auto in : node.inputs)
      n.children.push_back(ids[in]);
    ids[node.id] = add(std::move(n));
  }
  return ids;
}

EClassId EGraph::merge(EClassId a, EClassId b) {
  a = find(a);
  b = find(b);
  if (a == b)
    return a;
  const auto &ca = classes_[a];
  const auto &cb = classes_[b];
  if (!(ca.type == cb.type) || !(ca.sbp == cb.sbp)) {
    auto describe = [](const EClass &c) {
      return c.type.to_string() + (c.sbp ? " " + c.sbp->to_string() : "");
    };
    throw Error(ErrorCode::TypeMismatch, "cannot merge e" + std::to_string(a) + " (" +
                                             describe(ca) + ") with e" + std::to_string(b) +
                                             " (" + describe(cb) + ")");
  }
  // The smaller id stays canonical so dumps are stable.
  if (b < a)
    std::swap(a, b);
  parent_[b] = a;
  auto &into = classes_[a].nodes;
  auto &from = classes_[b].nodes;
  into.insert(into.end(), std::make_move_iterator(from.begin()),
              std::make_move_iterator(from.end()));
  from.clear();
  from.shrink_to_fit();
  dirty_ = true;
  return a;
}

std::size_t EGraph::rebuild() {
  std::size_t merges = 0;
  while (dirty_) {
    dirty_ = false;
    std::unordered_map<ENode, EClassId, ENodeHash> fresh;
    fresh.reserve(memo_.size());
    std::vector<std::pair<EClassId, EClassId>> pending;
    for (std::size_t id = 0; id < classes_.size(); ++id) {
      if (find(static_cast<EClassId>(id)) != static_cast<EClassId>(id))
        continue;
      auto &nodes = classes_[id].nodes;
      std::vector<ENode> kept;
      kept.reserve(nodes.size());
      for (auto &n : nodes) {
        ENode c = canonicalize(std::move(n));
        auto [it, inserted] = fresh.emplace(c, static_cast<EClassId>(id));
        if (inserted)
          kept.push_back(std::move(c));
        else if (find(it->second) != static_cast<EClassId>(id))
          pending.emplace_back(it->second, static_cast<EClassId>(id));
      }
      nodes = std::move(kept);
    }
    memo_ = std::move(fresh);
    for (auto [a, b] : pending)
      if (find(a) != find(b)) {
        merge(a, b);
        ++merges;
      }
  }
  return merges;
}

std::optional<EClassId> EGraph::lookup(ENode n) const {
  n = canonicalize(std::move(n));
  if (auto it = memo_.find(n); it != memo_.end())
    return find(it->second);
  return std::nullopt;
}

std::optional<EClassId> EGraph::lookup_term(const Graph &g, NodeId node) const {
  std::vector<std::optional<EClassId>> ids(g.size());
  for (NodeId i = 0; i <= node; ++i) {
    const auto &gn = g.node(i);
    ENode n{gn.kind, {}, gn.sbp};
    bool ok = true;
    for (auto in : gn.inputs) {
      if (!ids[in]) {
        ok = false;
        break;
      }
      n.children.push_back(*ids[in]);
    }
    if (ok)
      ids[i] = lookup(std::move(n));
  }
  return ids[node];
}

std::vector<EClassId> EGraph::class_ids() const {
  std::vector<EClassId> ids;
  for (std::size_t id = 0; id < classes_.size(); ++id)
    if (find(static_cast<EClassId>(id)) == static_cast<EClassId>(id))
      ids.push_back(static_cast<EClassId>(id));
  return ids;
}

std::size_t EGraph::class_count() const { return class_ids().size(); }

std::size_t EGraph::node_count() const {
  std::size_t total = 0;
  for (auto id : class_ids())
    total += classes_[id].nodes.size();
  return total;
}

std::vector<bool> EGraph::productive_classes() const {
  std::vector<bool> ok(classes_.size(), false);
  for (bool changed = true; changed;) {
    changed = false;
    for (auto id : class_ids()) {
      if (ok[id])
        continue;
      for (const auto &n : classes_[id].nodes) {
        bool all = std::all_of(n.children.begin(), n.children.end(),
                               [&](EClassId c) { return ok[find(c)]; });
        if (all) {
          ok[id] = true;
          changed = true;
          break;
        }
      }
    }
  }
  for (std::size_t id = 0; id < classes_.size(); ++id)
    ok[id] = ok[find(static_cast<EClassId>(id))];
  return ok;
}

std::string EGraph::dump() const {
  std::ostringstream os;
  for (auto id : class_ids()) {
    const auto &c = classes_[id];
    os << "e" << id << " : " << c.type.to_string();
    if (c.sbp)
      os << " " << c.sbp->to_string();
    os << "\n";
    std::vector<std::string> lines;
    for (const auto &n : c.nodes)
      lines.push_back(canonicalize(n).to_string());
    std::sort(lines.begin(), lines.end());
    for (const auto &l : lines)
      os << "  " << l << "\n";
  }
  return os.str();
}

std::string EGraph::to_dot() const {
  std::ostringstream os;
  os << "digraph egraph {\n  compound=true;\n  node [shape=box];\n";
  for (auto id : class_ids()) {
    const auto &c = classes_[id];
    os << "  subgraph cluster_e" << id << " {\n    style=dashed;\n    label=\"e" << id
       << "\";\n";
    for (std::size_t k = 0; k < c.nodes.size(); ++k)
      os << "    n" << id << "_" << k << " [label=\"" << c.nodes[k].kind.to_string()
         << "\"];\n";
    os << "  }\n";
  }
  for (auto id : class_ids()) {
    const auto &c = classes_[id];
    for (std::size_t k = 0; k < c.nodes.size(); ++k)
      for (auto child : c.nodes[k].children) {
        auto cc = find(child);
        os << "  n" << id << "_" << k << " -> n" << cc << "_0 [lhead=cluster_e" << cc
           << "];\n";
      }
  }
  os << "}\n";
  return os.str();
}

std::size_t apply_all(EGraph &g, const RuleSet &rules) {
  std::vector<std::pair<const Rule *, RuleMatch>> matches;
  for (const auto &rule : rules)
    for (auto &m : rule.search(g))
      matches.emplace_back(&rule, std::move(m));

  const std::size_t before = g.node_count();
  std::size_t merges = 0;
  for (auto &[rule, m] : matches) {
    EClassId built = m.build(g);
    if (g.find(built) != g.find(m.root)) {
      g.merge(built, m.root);
      ++merges;
    }
  }
  merges += g.rebuild();
  const std::size_t after = g.node_count();
  const std::size_t added = after > before ? after - before : 0;
  log_debug("apply_all: " + std::to_string(matches.size()) + " matches, " +
            std::to_string(added) + " nodes added, " + std::to_string(merges) + " merges");
  return added + merges;
}

SaturationReport saturate(EGraph &g, const RuleSet &rules, SaturationLimits limits) {
  SaturationReport report;
  g.rebuild();
  while (true) {
    if (report.iterations >= limits.max_iters || g.node_count() >= limits.max_nodes)
      break;
    if (apply_all(g, rules) == 0) {
      report.saturated = true;
      break;
    }
    ++report.iterations;
  }
  report.node_count = g.node_count();
  return report;
}

} // namespace minicase
