// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Hashconsed e-graph with union-find and deferred congruence repair.

#pragma once

#include "minicase/tensor_ir.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace minicase {

using EClassId = std::int64_t;

struct ENode {
  OpKind kind;
  std::vector<EClassId> children;
  /// Output distribution of a compute node in a distributed e-graph.
  std::optional<NdSbp> sbp;

  friend bool operator==(const ENode &a, const ENode &b) {
    return a.kind == b.kind && a.children == b.children && a.sbp == b.sbp;
  }
  std::size_t hash() const;
  std::string to_string() const;
};

struct ENodeHash {
  std::size_t operator()(const ENode &n) const { return n.hash(); }
};

struct EClass {
  EClassId id = 0;
  std::vector<ENode> nodes;
  /// Logical tensor type shared by every member.
  TensorType type;
  /// Distribution of the value; nullopt means host (or a non-distributed graph).
  std::optional<NdSbp> sbp;
};

class EGraph {
public:
  /// Inserts `n` (children are canonicalized first). Returns the class of a
  /// congruent node when one exists. Throws on ill-typed nodes.
  EClassId add(ENode n);
  EClassId add(const OpKind &kind, const std::vector<EClassId> &children,
               std::optional<NdSbp> sbp = std::nullopt) {
    return add(ENode{kind, children, std::move(sbp)});
  }
  /// Adds every node of `g`; result[i] is the class of node i.
  std::vector<EClassId> add_graph(const Graph &g);

  /// Merges two classes. Throws TypeMismatch when their types differ.
  EClassId merge(EClassId a, EClassId b);
  EClassId find(EClassId id) const;

  /// Restores congruence and canonical node lists. Returns upward merges.
  std::size_t rebuild();

  /// Class containing a node congruent to `n`, if any.
  std::optional<EClassId> lookup(ENode n) const;
  /// Class representing the term rooted at `node` of `g`, if the whole term
  /// is present.
  std::optional<EClassId> lookup_term(const Graph &g, NodeId node) const;

  const EClass &eclass(EClassId id) const { return classes_.at(find(id)); }
  /// Canonical class ids in ascending order.
  std::vector<EClassId> class_ids() const;
  std::size_t class_count() const;
  std::size_t node_count() const;

  /// Classes that can produce at least one finite term.
  std::vector<bool> productive_classes() const;

  /// Deterministic listing of classes and nodes by canonical id.
  std::string dump() const;
  std::string to_dot() const;

private:
  ENode canonicalize(ENode n) const;

  std::vector<EClass> classes_;
  mutable std::vector<EClassId> parent_;
  std::unordered_map<ENode, EClassId, ENodeHash> memo_;
  bool dirty_ = false;
};

/// One rule firing found against a snapshot: `build` adds the right-hand
/// side and returns its class, which is then merged with `root`.
struct RuleMatch {
  EClassId root;
  std::function<EClassId(EGraph &)> build;
};

struct Rule {
  std::string name;
  std::function<std::vector<RuleMatch>(const EGraph &)> search;
};

using RuleSet = std::vector<Rule>;

/// Applies every match of every rule found against the current state, then
/// rebuilds. Returns nodes added plus effective merges.
std::size_t apply_all(EGraph &g, const RuleSet &rules);

struct SaturationLimits {
  std::size_t max_iters = 30;
  std::size_t max_nodes = 50000;
};

struct SaturationReport {
  std::size_t iterations = 0;
  std::size_t node_count = 0;
  bool saturated = false;
};

SaturationReport saturate(EGraph &g, const RuleSet &rules, SaturationLimits limits = {});

} // namespace minicase
