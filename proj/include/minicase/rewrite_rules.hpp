// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Transpose-motion and vectorization rewrites over the e-graph.

#pragma once

#include "minicase/egraph.hpp"

#include <string>
#include <vector>

namespace minicase {

/// CombineBinaryLeftTrans, CombineBinaryRightTrans, CombineUnaryTrans,
/// FoldTwoTrans, FoldNopTrans.
RuleSet rules_transpose();

struct VectorizeConfig {
  std::vector<Shape> lane_options{{8}, {16, 16}};
  /// Lane vectors longer than this are ignored.
  std::size_t max_pack_rank = 2;
};

/// MetaPackOperation (Unary, Binary, MatMul) and FoldNopPack.
RuleSet rules_vectorize(const VectorizeConfig &config = {});

/// Rule sets by comma-separated family name: "transpose", "vectorize".
RuleSet rules_by_name(const std::string &families, const VectorizeConfig &config = {});

/// Composition used by FoldTwoTrans: T_outer(T_inner(A)) = T_result(A).
Shape compose_permutations(const Shape &inner, const Shape &outer);

/// Destructive rewriting on a plain graph: each named transpose rule in
/// `order` is applied bottom-up until it no longer matches, then the next
/// rule runs. Unknown names throw Validation.
Graph rewrite_greedy(const Graph &g, const std::vector<std::string> &order);

} // namespace minicase
