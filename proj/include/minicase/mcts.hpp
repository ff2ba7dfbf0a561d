// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo tree search over tiered tile graphs. Merge and reorder
// actions are the edges; every leaf is scored by solving its tiling model.

#pragma once

#include "minicase/minlp.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace minicase {

/// Thread-safe memo of solved states keyed by TieredTileGraph::key().
/// An empty optional records an infeasible state.
class SolveCache {
public:
  std::optional<std::optional<MinlpSolution>> find(const std::string &key) const;
  void store(const std::string &key, std::optional<MinlpSolution> sol);
  std::size_t size() const;

private:
  mutable std::mutex mu_;
  std::map<std::string, std::optional<MinlpSolution>> entries_;
};

struct MctsOptions {
  int iterations = 100;
  double exploration_c = std::sqrt(2.0);
  std::uint64_t seed = 0;
  /// Leaves solved concurrently per round; 1 runs strictly sequentially.
  unsigned threads = 1;
  std::size_t max_reorder_loops = 4;
  SolveOptions solve;
  /// Shared between searches over the same model inputs when set.
  std::shared_ptr<SolveCache> cache;
};

struct MctsResult {
  TieredTileGraph best;
  std::vector<ScheduleAction> actions; // from the root to `best`
  MinlpSolution solution;
  double objective = 0.0;
  double root_objective = 0.0;
  /// Best objective after every iteration.
  std::vector<double> history;
  std::size_t states = 0;    // distinct states in the search graph
  std::size_t evaluated = 0; // states whose model was solved
};

/// Index of the child maximising W/N + c * sqrt(ln(parent_n) / N). Children
/// with N = 0 win outright; ties keep the lowest index.
std::size_t uct_select(const std::vector<double> &w, const std::vector<double> &n, double parent_n, double c);

/// Iteration 1 evaluates the root; every later iteration selects by UCT,
/// expands one untried action (actions reaching an already known state only
/// add an edge), solves the new leaf and backs up root_objective/objective.
/// Throws Validation when iterations < 1 and Infeasible when no visited
/// state fits the hardware.
MctsResult mcts_search(const TieredTileGraph &root, const HardwareSpec &hw, const UKernelModel &ukernels,
                       const MctsOptions &opts = {});

} // namespace minicase
