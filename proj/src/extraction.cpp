// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/extraction.hpp"

#include "minicase/error.hpp"
#include "minicase/log.hpp"
#include "minicase/memory_planner.hpp"
#include "minicase/rewrite_rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace minicase {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<EClassId> reachable_classes(const EGraph &g, const std::vector<EClassId> &roots) {
  std::vector<EClassId> order;
  std::set<EClassId> seen;
  std::vector<EClassId> queue;
  for (auto r : roots) {
    auto c = g.find(r);
    if (seen.insert(c).second)
      queue.push_back(c);
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    auto c = queue[head];
    order.push_back(c);
    for (const auto &n : g.eclass(c).nodes)
      for (auto ch : n.children) {
        auto cc = g.find(ch);
        if (seen.insert(cc).second)
          queue.push_back(cc);
      }
  }
  return order;
}

struct Candidate {
  ENode node;
  double cost;
  std::vector<int> children; // dense indices
};

class BranchAndBound {
public:
  BranchAndBound(const ExtractionProblem &p) : p_(p), g_(*p.egraph) {
    classes_ = reachable_classes(g_, p.roots);
    for (std::size_t i = 0; i < classes_.size(); ++i)
      dense_[classes_[i]] = static_cast<int>(i);
    cands_.resize(classes_.size());
    min_cost_.assign(classes_.size(), kInf);
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      std::vector<std::pair<std::string, Candidate>> keyed;
      for (const auto &n : g_.eclass(classes_[i]).nodes) {
        Candidate c;
        c.node = n;
        for (auto &ch : c.node.children)
          ch = g_.find(ch);
        c.cost = p.cost(g_, classes_[i], c.node);
        if (!(c.cost >= 0.0) || std::isinf(c.cost))
          continue;
        for (auto ch : c.node.children)
          c.children.push_back(dense_.at(ch));
        if (p.memory_limit && working_set(classes_[i], c.node) > *p.memory_limit)
          continue;
        keyed.emplace_back(c.node.to_string(), std::move(c));
      }
      std::stable_sort(keyed.begin(), keyed.end(), [](const auto &a, const auto &b) {
        if (a.second.cost != b.second.cost)
          return a.second.cost < b.second.cost;
        return a.first < b.first;
      });
      for (auto &[key, c] : keyed) {
        min_cost_[i] = std::min(min_cost_[i], c.cost);
        cands_[i].push_back(std::move(c));
      }
    }
    choice_.assign(classes_.size(), -1);
    need_.assign(classes_.size(), 0);
  }

  ExtractionResult run() {
    seed_incumbent();
    for (auto r : p_.roots) {
      int d = dense_.at(g_.find(r));
      if (need_[d]++ == 0) {
        pending_.insert(d);
        pending_min_ += min_cost_[d];
      }
    }
    search(0.0);
    if (best_cost_ == kInf)
      throw Error(ErrorCode::Infeasible, p_.memory_limit
                                             ? "no acyclic extraction fits the memory limit"
                                             : "no acyclic extraction exists");
    ExtractionResult r;
    r.selection = best_;
    r.graph = selection_to_graph(g_, best_, p_.roots);
    r.graph.placement = p_.placement;
    r.cost = best_cost_;
    r.optimal = !budget_hit_;
    r.nodes_visited = visited_;
    if (budget_hit_)
      log_warn("extraction budget exhausted; result may be suboptimal");
    return r;
  }

private:
  static bool is_view(const ENode &n) {
    return n.kind.op == Op::Reshape || n.kind.op == Op::Slice;
  }

  std::int64_t class_bytes(EClassId cls) const {
    const auto &ec = g_.eclass(cls);
    if (!p_.placement)
      return ec.type.byte_size();
    if (!ec.sbp)
      return 0;
    return product(shard_shape(ec.type.shape, *ec.sbp, *p_.placement)) * product(ec.type.lanes) *
           static_cast<std::int64_t>(byte_width(ec.type.dtype));
  }

  // Bytes that are live together while `n` executes: its output and its
  // distinct operands. Operand classes that may be views are not counted.
  std::int64_t working_set(EClassId cls, const ENode &n) const {
    std::int64_t total = is_view(n) ? 0 : class_bytes(cls);
    std::set<EClassId> seen;
    for (auto ch : n.children) {
      if (!seen.insert(ch).second)
        continue;
      const auto &nodes = g_.eclass(ch).nodes;
      if (std::none_of(nodes.begin(), nodes.end(), is_view))
        total += class_bytes(ch);
    }
    return total;
  }

  // Largest cost of a single dependency chain that some pending class still
  // has to pay for. Classes on one chain are distinct, so the sum along it
  // never exceeds the remaining cost of any completion.
  double chain_bound() {
    auto n = classes_.size();
    chain_.assign(n, 0.0);
    for (std::size_t sweep = 0; sweep < n; ++sweep) {
      bool changed = false;
      for (std::size_t r = n; r-- > 0;) {
        if (choice_[r] >= 0)
          continue;
        double best = kInf;
        for (const auto &c : cands_[r]) {
          double deepest = 0.0;
          for (int ch : c.children)
            if (choice_[ch] < 0)
              deepest = std::max(deepest, chain_[ch]);
          best = std::min(best, c.cost + deepest);
        }
        if (best > chain_[r] + 1e-18) {
          chain_[r] = best;
          changed = true;
        }
      }
      if (!changed)
        break;
    }
    double out = 0.0;
    for (int c : pending_)
      out = std::max(out, chain_[c]);
    return out;
  }

  bool reaches(int from, int target) const {
    std::vector<int> stack{from};
    std::vector<bool> seen(classes_.size(), false);
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      if (c == target)
        return true;
      if (seen[c] || choice_[c] < 0)
        continue;
      seen[c] = true;
      for (int ch : cands_[c][choice_[c]].children)
        stack.push_back(ch);
    }
    return false;
  }

  Selection current_selection() const {
    Selection sel;
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (choice_[i] >= 0)
        sel.emplace(classes_[i], cands_[i][choice_[i]].node);
    return sel;
  }

  bool fits(const Selection &sel) const {
    if (!p_.memory_limit)
      return true;
    Graph gr = selection_to_graph(g_, sel, p_.roots);
    return peak_live_bytes(gr, p_.placement) <= *p_.memory_limit;
  }

  void consider(const Selection &sel) {
    double c = selection_cost(g_, sel, p_.roots, p_.cost);
    if (c < best_cost_ && fits(sel)) {
      best_cost_ = c;
      best_ = sel;
    }
  }

  bool try_incumbent(const NodeCostFn &cost) {
    Selection tree = tree_cost_selection(g_, cost);
    try {
      Graph gr = selection_to_graph(g_, tree, p_.roots);
      (void)gr;
    } catch (const Error &) {
      return false; // cyclic or incomplete
    }
    double before = best_cost_;
    consider(tree);
    return best_cost_ < before;
  }

  void seed_incumbent() {
    if (try_incumbent(p_.cost) || !p_.memory_limit)
      return;
    // Charge a growing price per byte until the tree choice fits, so the
    // search starts with a feasible bound.
    for (double price = 1e-15; price < 1.0; price *= 10.0) {
      auto penalized = [this, price](const EGraph &g, EClassId cls, const ENode &n) {
        return p_.cost(g, cls, n) + (is_view(n) ? 0.0 : price * static_cast<double>(class_bytes(cls)));
      };
      if (try_incumbent(penalized))
        return;
    }
  }

  void search(double cost) {
    if (budget_hit_)
      return;
    if (++visited_ > p_.node_budget) {
      budget_hit_ = true;
      return;
    }
    if (cost + pending_min_ >= best_cost_)
      return;
    if (!pending_.empty() && cost + chain_bound() >= best_cost_)
      return;
    if (pending_.empty()) {
      consider(current_selection());
      return;
    }
    int c = *pending_.begin();
    pending_.erase(pending_.begin());
    pending_min_ -= min_cost_[c];
    for (std::size_t k = 0; k < cands_[c].size(); ++k) {
      const auto &cand = cands_[c][k];
      bool cyclic = false;
      choice_[c] = static_cast<int>(k);
      for (int ch : cand.children)
        if (reaches(ch, c)) {
          cyclic = true;
          break;
        }
      if (cyclic)
        continue;
      std::vector<int> opened;
      for (int ch : cand.children)
        if (need_[ch]++ == 0 && choice_[ch] < 0) {
          pending_.insert(ch);
          pending_min_ += min_cost_[ch];
          opened.push_back(ch);
        }
      search(cost + cand.cost);
      for (int ch : cand.children)
        --need_[ch];
      for (int ch : opened) {
        pending_.erase(ch);
        pending_min_ -= min_cost_[ch];
      }
    }
    choice_[c] = -1;
    pending_.insert(c);
    pending_min_ += min_cost_[c];
  }

  const ExtractionProblem &p_;
  const EGraph &g_;
  std::vector<EClassId> classes_;
  std::unordered_map<EClassId, int> dense_;
  std::vector<std::vector<Candidate>> cands_;
  std::vector<double> min_cost_;
  std::vector<double> chain_;
  std::vector<int> choice_;
  std::vector<int> need_;
  std::set<int> pending_;
  double pending_min_ = 0.0;
  double best_cost_ = kInf;
  Selection best_;
  std::size_t visited_ = 0;
  bool budget_hit_ = false;
};

} // namespace

Graph selection_to_graph(const EGraph &g, const Selection &sel,
                         const std::vector<EClassId> &roots) {
  GraphBuilder b;
  std::map<EClassId, NodeId> built;
  std::set<EClassId> active;
  std::vector<NodeId> inputs;

  // Iterative post-order so deep chains do not exhaust the stack.
  auto visit = [&](EClassId root) {
    struct Frame {
      EClassId cls;
      std::size_t next = 0;
    };
    std::vector<Frame> stack{{g.find(root)}};
    while (!stack.empty()) {
      auto &f = stack.back();
      if (built.count(f.cls)) {
        stack.pop_back();
        continue;
      }
      auto it = sel.find(f.cls);
      if (it == sel.end())
        throw Error(ErrorCode::Infeasible, "no node selected for e" + std::to_string(f.cls));
      const auto &node = it->second;
      if (f.next == 0)
        active.insert(f.cls);
      if (f.next < node.children.size()) {
        auto ch = g.find(node.children[f.next++]);
        if (built.count(ch))
          continue;
        if (active.count(ch))
          throw Error(ErrorCode::Infeasible,
                      "selection is cyclic through e" + std::to_string(ch));
        stack.push_back({ch});
        continue;
      }
      std::vector<NodeId> ins;
      for (auto ch : node.children)
        ins.push_back(built.at(g.find(ch)));
      NodeId id = b.add(node.kind, ins, node.sbp);
      if (node.kind.op == Op::Input)
        inputs.push_back(id);
      built[f.cls] = id;
      active.erase(f.cls);
      stack.pop_back();
    }
  };
  for (auto r : roots)
    visit(r);
  Graph out = b.build();
  out.inputs = inputs;
  for (auto r : roots)
    out.outputs.push_back(built.at(g.find(r)));
  return out;
}

double selection_cost(const EGraph &g, const Selection &sel, const std::vector<EClassId> &roots,
                      const NodeCostFn &cost) {
  std::set<EClassId> used;
  std::vector<EClassId> stack;
  for (auto r : roots)
    stack.push_back(g.find(r));
  while (!stack.empty()) {
    auto c = stack.back();
    stack.pop_back();
    if (!used.insert(c).second)
      continue;
    for (auto ch : sel.at(c).children)
      stack.push_back(g.find(ch));
  }
  double total = 0.0;
  for (auto c : used)
    total += cost(g, c, sel.at(c));
  return total;
}

Selection tree_cost_selection(const EGraph &g, const NodeCostFn &cost) {
  std::map<EClassId, double> best;
  Selection sel;
  for (bool changed = true; changed;) {
    changed = false;
    for (auto id : g.class_ids()) {
      for (const auto &n : g.eclass(id).nodes) {
        double total = cost(g, id, n);
        bool finite = total >= 0.0 && !std::isinf(total);
        for (auto ch : n.children) {
          auto it = best.find(g.find(ch));
          if (it == best.end()) {
            finite = false;
            break;
          }
          total += it->second;
        }
        if (!finite)
          continue;
        auto it = best.find(id);
        if (it == best.end() || total < it->second) {
          best[id] = total;
          ENode canon = n;
          for (auto &ch : canon.children)
            ch = g.find(ch);
          sel[id] = canon;
          changed = true;
        }
      }
    }
  }
  return sel;
}

ExtractionResult extract(const ExtractionProblem &p) {
  if (!p.egraph || !p.cost)
    throw Error(ErrorCode::Validation, "extraction needs an e-graph and a cost function");
  BranchAndBound bb(p);
  return bb.run();
}

std::string pseudo_boolean_encoding(const ExtractionProblem &p, double scale) {
  const EGraph &g = *p.egraph;
  auto classes = reachable_classes(g, p.roots);
  std::map<EClassId, int> class_var;
  std::vector<std::tuple<EClassId, ENode, int>> nodes;
  int next = 1;
  for (auto c : classes)
    class_var[c] = next++;
  for (auto c : classes)
    for (const auto &n : g.eclass(c).nodes)
      nodes.emplace_back(c, n, next++);

  std::ostringstream body;
  std::size_t constraints = 0;
  for (auto r : p.roots) {
    body << "+1 x" << class_var.at(g.find(r)) << " >= 1 ;\n";
    ++constraints;
  }
  for (auto c : classes) {
    body << "-1 x" << class_var.at(c);
    for (const auto &[cls, n, v] : nodes)
      if (cls == c)
        body << " +1 x" << v;
    body << " >= 0 ;\n";
    ++constraints;
  }
  for (const auto &[cls, n, v] : nodes)
    for (auto ch : n.children) {
      body << "-1 x" << v << " +1 x" << class_var.at(g.find(ch)) << " >= 0 ;\n";
      ++constraints;
    }

  std::ostringstream os;
  os << "* #variable= " << next - 1 << " #constraint= " << constraints << "\n";
  os << "* class variables x1..x" << classes.size() << ", node variables after\n";
  os << "* acyclicity is checked on the decoded selection\n";
  os << "min:";
  for (const auto &[cls, n, v] : nodes)
    os << " +" << static_cast<long long>(std::llround(p.cost(g, cls, n) * scale)) << " x" << v;
  os << " ;\n" << body.str();
  return os.str();
}

Graph greedy_extract(const Graph &g, const std::vector<std::string> &order) {
  return rewrite_greedy(g, order);
}

NodeCostFn unit_transpose_cost() {
  return [](const EGraph &, EClassId, const ENode &n) {
    return n.kind.op == Op::Transpose ? 1.0 : 0.0;
  };
}

} // namespace minicase
