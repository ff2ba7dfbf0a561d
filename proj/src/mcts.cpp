// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/mcts.hpp"

#include "minicase/error.hpp"
#include "minicase/log.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

namespace minicase {

std::optional<std::optional<MinlpSolution>> SolveCache::find(const std::string &key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end())
    return std::nullopt;
  return it->second;
}

void SolveCache::store(const std::string &key, std::optional<MinlpSolution> sol) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.emplace(key, std::move(sol));
}

std::size_t SolveCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::size_t uct_select(const std::vector<double> &w, const std::vector<double> &n, double parent_n, double c) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] <= 0.0)
      return i;
    double score = w[i] / n[i] + c * std::sqrt(std::log(std::max(parent_n, 1.0)) / n[i]);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TreeNode {
  TieredTileGraph state;
  std::string key;
  std::vector<ScheduleAction> actions;
  int depth = 0;
  double visits = 0.0;
  double reward = 0.0;
  bool actions_ready = false;
  std::vector<ScheduleAction> untried;
  std::vector<std::size_t> children;
  bool evaluated = false;
  std::optional<MinlpSolution> solution;
};

class Search {
public:
  Search(const TieredTileGraph &root, const HardwareSpec &hw, const UKernelModel &uk, const MctsOptions &opts)
      : hw_(hw), uk_(uk), opts_(opts), rng_(opts.seed),
        cache_(opts.cache ? opts.cache : std::make_shared<SolveCache>()) {
    depth_limit_ = 2 * static_cast<int>(root.ops.size());
    TreeNode n;
    n.state = root;
    n.key = root.key();
    index_[n.key] = 0;
    nodes_.push_back(std::move(n));
  }

  MctsResult run() {
    // The root is the first leaf.
    nodes_[0].visits = 1.0;
    evaluate_batch({0});
    backup({0}, 0);
    history_.push_back(best_obj_);

    const unsigned width = std::max(1u, opts_.threads);
    int done = 1;
    while (done < opts_.iterations) {
      std::vector<std::vector<std::size_t>> paths;
      std::vector<std::size_t> pending;
      for (unsigned t = 0; t < width && done < opts_.iterations; ++t, ++done) {
        auto path = select();
        for (auto i : path)
          nodes_[i].visits += 1.0;
        std::size_t leaf = path.back();
        if (!nodes_[leaf].evaluated && std::find(pending.begin(), pending.end(), leaf) == pending.end())
          pending.push_back(leaf);
        paths.push_back(std::move(path));
      }
      evaluate_batch(pending);
      for (const auto &p : paths) {
        backup(p, p.back());
        history_.push_back(best_obj_);
      }
    }

    if (!std::isfinite(best_obj_))
      throw Error(ErrorCode::Infeasible, "no explored schedule fits the hardware");
    const auto &b = nodes_[best_];
    MctsResult r;
    r.best = b.state;
    r.actions = b.actions;
    r.solution = *b.solution;
    r.objective = best_obj_;
    r.root_objective = nodes_[0].solution ? nodes_[0].solution->objective : kInf;
    r.history = std::move(history_);
    r.states = nodes_.size();
    r.evaluated = static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode &n) { return n.evaluated; }));
    return r;
  }

private:
  void ensure_actions(std::size_t i) {
    auto &n = nodes_[i];
    if (n.actions_ready)
      return;
    n.actions_ready = true;
    n.untried = legal_actions(n.state, opts_.max_reorder_loops);
    std::shuffle(n.untried.begin(), n.untried.end(), rng_);
  }

  std::vector<std::size_t> select() {
    std::vector<std::size_t> path{0};
    std::set<std::size_t> on_path{0};
    std::size_t cur = 0;
    while (nodes_[cur].depth < depth_limit_) {
      ensure_actions(cur);
      bool expanded = false;
      while (!nodes_[cur].untried.empty()) {
        ScheduleAction a = nodes_[cur].untried.back();
        nodes_[cur].untried.pop_back();
        TieredTileGraph next = apply_action(nodes_[cur].state, a);
        std::string key = next.key();
        int depth = nodes_[cur].depth + 1;
        auto known = index_.find(key);
        if (known != index_.end()) {
          std::size_t j = known->second;
          auto &kids = nodes_[cur].children;
          if (j != cur && std::find(kids.begin(), kids.end(), j) == kids.end())
            kids.push_back(j);
          if (depth < nodes_[j].depth) {
            nodes_[j].depth = depth;
            nodes_[j].actions = nodes_[cur].actions;
            nodes_[j].actions.push_back(a);
          }
          continue;
        }
        TreeNode n;
        n.state = std::move(next);
        n.key = key;
        n.depth = depth;
        n.actions = nodes_[cur].actions;
        n.actions.push_back(a);
        std::size_t j = nodes_.size();
        index_[key] = j;
        nodes_.push_back(std::move(n));
        nodes_[cur].children.push_back(j);
        path.push_back(j);
        expanded = true;
        break;
      }
      if (expanded)
        break;

      std::vector<std::size_t> options;
      std::vector<double> w, n;
      for (auto j : nodes_[cur].children)
        if (!on_path.count(j)) {
          options.push_back(j);
          w.push_back(nodes_[j].reward);
          n.push_back(nodes_[j].visits);
        }
      if (options.empty())
        break;
      cur = options[uct_select(w, n, nodes_[cur].visits, opts_.exploration_c)];
      path.push_back(cur);
      on_path.insert(cur);
    }
    return path;
  }

  std::optional<MinlpSolution> solve_state(const TieredTileGraph &s) const {
    auto key = s.key();
    if (auto hit = cache_->find(key))
      return *hit;
    std::optional<MinlpSolution> sol;
    try {
      sol = solve(build_model(s, hw_, uk_), opts_.solve);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::Infeasible)
        throw;
    }
    cache_->store(key, sol);
    return sol;
  }

  void evaluate_batch(const std::vector<std::size_t> &leaves) {
    std::vector<std::optional<MinlpSolution>> out(leaves.size());
    if (opts_.threads <= 1 || leaves.size() <= 1) {
      for (std::size_t i = 0; i < leaves.size(); ++i)
        out[i] = solve_state(nodes_[leaves[i]].state);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(leaves.size());
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < std::min<std::size_t>(opts_.threads, leaves.size()); ++t)
        pool.emplace_back([&] {
          for (std::size_t i; (i = next.fetch_add(1)) < leaves.size();) {
            try {
              out[i] = solve_state(nodes_[leaves[i]].state);
            } catch (...) {
              errors[i] = std::current_exception();
            }
          }
        });
      for (auto &t : pool)
        t.join();
      for (auto &e : errors)
        if (e)
          std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      auto &n = nodes_[leaves[i]];
      n.evaluated = true;
      n.solution = std::move(out[i]);
      double obj = n.solution ? n.solution->objective : kInf;
      if (obj < best_obj_) {
        best_obj_ = obj;
        best_ = leaves[i];
        log_debug("mcts: new best " + std::to_string(obj) + " after " + std::to_string(n.actions.size()) +
                  " actions");
      }
      if (!std::isfinite(reference_) && std::isfinite(obj))
        reference_ = obj;
    }
  }

  void backup(const std::vector<std::size_t> &path, std::size_t leaf) {
    const auto &sol = nodes_[leaf].solution;
    double r = sol && std::isfinite(reference_) ? reference_ / sol->objective : 0.0;
    for (auto i : path)
      nodes_[i].reward += r;
  }

  const HardwareSpec &hw_;
  const UKernelModel &uk_;
  const MctsOptions &opts_;
  std::mt19937_64 rng_;
  std::shared_ptr<SolveCache> cache_;
  int depth_limit_ = 0;
  std::vector<TreeNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t best_ = 0;
  double best_obj_ = kInf;
  double reference_ = kInf;
  std::vector<double> history_;
};

} // namespace

MctsResult mcts_search(const TieredTileGraph &root, const HardwareSpec &hw, const UKernelModel &ukernels,
                       const MctsOptions &opts) {
  if (opts.iterations < 1)
    throw Error(ErrorCode::Validation, "mcts needs at least one iteration");
  return Search(root, hw, ukernels, opts).run();
}

} // namespace minicase
