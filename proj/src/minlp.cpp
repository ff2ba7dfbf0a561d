// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/minlp.hpp"

#include "minicase/error.hpp"
#include "minicase/log.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace minicase {

namespace {

std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d <= n; ++d)
    if (n % d == 0)
      out.push_back(d);
  return out;
}

bool contains(const std::vector<int> &v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

struct Position {
  int level;
  int entry;
};

// Positions of one operator's loop chain, outermost first.
std::vector<Position> chain_positions(const TieredTileGraph &ttg, int op) {
  std::vector<Position> out;
  for (int n = ttg.top(); n >= 1; --n) {
    auto loops = ttg.node(n, ttg.node_of(op, n)).loops.size();
    for (std::size_t e = 0; e < std::max<std::size_t>(1, loops); ++e)
      out.push_back({n, static_cast<int>(e)});
  }
  out.push_back({0, 0});
  return out;
}

std::string buffer_label(const TieredTileGraph &ttg, NodeId tensor) {
  const auto &n = ttg.graph.node(tensor);
  if (n.kind.op == Op::Input)
    return n.kind.name;
  int p = ttg.producer_of(tensor);
  return p >= 0 ? "Op" + std::to_string(p) + ".out" : "t" + std::to_string(tensor);
}

} // namespace

std::int64_t MinlpModel::capacity(int storage) const {
  return hw.levels.at(mem_level.at(static_cast<std::size_t>(storage))).capacity;
}

double MinlpModel::bandwidth(int storage) const {
  return hw.levels.at(mem_level.at(static_cast<std::size_t>(storage))).bandwidth;
}

TileExtents::TileExtents(const TieredTileGraph &ttg, const TileAssignment &tiles) : ttg_(&ttg), tiles_(&tiles) {
  const auto levels = static_cast<std::size_t>(std::max(ttg.num_levels, 1));
  for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
    nodes_.emplace_back(levels, static_cast<int>(o));
    loops_.emplace_back(levels, nullptr);
    for (int n = 0; n < ttg.num_levels; ++n) {
      auto nl = static_cast<std::size_t>(n);
      nodes_[o][nl] = ttg.node_of(static_cast<int>(o), n);
      loops_[o][nl] = &ttg.node(n, nodes_[o][nl]).loops;
    }
  }
}

int TileExtents::entries(int op, int level) const {
  if (level == 0)
    return 1;
  return static_cast<int>(std::max<std::size_t>(1, loops(op, level).size()));
}

std::int64_t TileExtents::tile(int level, int node, int var) const {
  auto it = tiles_->find(TileKey{level, node, var});
  return it == tiles_->end() ? 1 : it->second;
}

std::int64_t TileExtents::extent(int op, int level, int var) const {
  if (level == 0) {
    for (int n = 1; n <= ttg_->top(); ++n)
      if (contains(loops(op, n), var))
        return 1;
    return ttg_->var_extent.at(static_cast<std::size_t>(var));
  }
  std::int64_t below = extent(op, level - 1, var);
  return contains(loops(op, level), var) ? below * tile(level, node(op, level), var) : below;
}

std::int64_t TileExtents::extent_at(int op, int level, int entry, int var) const {
  if (level == 0)
    return extent(op, 0, var);
  const auto &ls = loops(op, level);
  std::int64_t e = extent(op, level - 1, var);
  for (std::size_t i = static_cast<std::size_t>(entry); i < ls.size(); ++i)
    if (ls[i] == var)
      e *= tile(level, node(op, level), var);
  return e;
}

std::int64_t TileExtents::trip(int op, int level, int entry) const {
  std::int64_t t = 1;
  for (int n = std::max(level, 1); n <= ttg_->top(); ++n) {
    int id = node(op, n);
    const auto &ls = loops(op, n);
    std::size_t stop = n == level ? static_cast<std::size_t>(entry) : ls.size();
    for (std::size_t i = 0; i < std::min(stop, ls.size()); ++i)
      t *= tile(n, id, ls[i]);
  }
  return t;
}

bool TileExtents::covers() const {
  for (std::size_t o = 0; o < ttg_->ops.size(); ++o)
    for (int v : ttg_->ops[o].vars)
      if (extent(static_cast<int>(o), ttg_->top(), v) != ttg_->var_extent.at(static_cast<std::size_t>(v)))
        return false;
  return true;
}

MinlpModel build_model(const TieredTileGraph &ttg, const HardwareSpec &hw, const UKernelModel &ukernels) {
  if (static_cast<std::size_t>(ttg.num_levels) > hw.levels.size())
    throw Error(ErrorCode::Validation, "tile graph has " + std::to_string(ttg.num_levels) +
                                           " levels but the hardware only " + std::to_string(hw.levels.size()));
  MinlpModel m;
  m.ttg = ttg;
  m.hw = hw;
  m.ukernels = ukernels;
  const int top = ttg.top();
  for (int s = 0; s <= top; ++s)
    m.mem_level.push_back(s == top ? hw.levels.size() - 1 : static_cast<std::size_t>(s));

  for (int n = top; n >= 1; --n)
    for (const auto &[id, node] : ttg.levels[static_cast<std::size_t>(n)]) {
      auto vars = node.loops;
      std::sort(vars.begin(), vars.end());
      for (int v : vars) {
        m.tile_vars.push_back(TileKey{n, id, v});
        m.domains.push_back(divisors(ttg.var_extent.at(static_cast<std::size_t>(v))));
      }
    }

  const auto &g = ttg.graph;
  auto users = g.users();
  // Scheduled microkernels run on the widest unit that suits the operator;
  // the logical graph's scalar unit is only the fallback.
  for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
    const auto &op = ttg.ops[o];
    ComputeUnit wide = op.kind.op == Op::MatMul ? ComputeUnit::Tensor : ComputeUnit::Vector;
    if (hw.peak_flops.count(wide) && ukernels.entries.count({op_name(op.kind.op), wide})) {
      m.units.push_back(wide);
      continue;
    }
    std::vector<TensorType> in;
    for (auto i : op.inputs)
      in.push_back(g.node(i).type);
    m.units.push_back(compute_unit(op.kind, in, g.node(op.node).type));
  }

  // Fusion level shared by a producer and all of its consumers, or 0.
  auto fusion_level = [&](int producer) {
    NodeId t = ttg.ops[static_cast<std::size_t>(producer)].node;
    bool is_output = std::find(g.outputs.begin(), g.outputs.end(), t) != g.outputs.end();
    if (is_output || users[static_cast<std::size_t>(t)].empty())
      return 0;
    int level = 0;
    for (auto u : users[static_cast<std::size_t>(t)]) {
      int c = ttg.producer_of(u);
      int lowest = 0;
      for (int n = top; n >= 1 && ttg.node_of(producer, n) == ttg.node_of(c, n); --n)
        lowest = n;
      if (lowest == 0)
        return 0;
      level = std::max(level, lowest);
    }
    return level;
  };

  for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
    const auto &op = ttg.ops[o];
    int oi = static_cast<int>(o);
    for (std::size_t k = 0; k < op.inputs.size(); ++k) {
      NodeId t = op.inputs[k];
      int p = ttg.producer_of(t);
      if (p >= 0 && fusion_level(p) > 0)
        continue; // read through the producer's fused buffer
      ScheduleBuffer b;
      b.name = buffer_label(ttg, t) + "@Op" + std::to_string(o);
      b.tensor = t;
      b.owner = oi;
      b.operand = static_cast<int>(k);
      b.ops = {oi};
      b.axes = op.operand_axes[k];
      b.elem_bytes = static_cast<std::int64_t>(byte_width(g.node(t).type.dtype));
      m.buffers.push_back(b);
    }
    ScheduleBuffer r;
    r.tensor = op.node;
    r.owner = oi;
    r.operand = -1;
    r.write = true;
    r.axes = op.out_axes;
    r.elem_bytes = static_cast<std::int64_t>(byte_width(g.node(op.node).type.dtype));
    r.fusion_level = fusion_level(oi);
    r.fused = r.fusion_level > 0;
    r.ops = {oi};
    if (r.fused) {
      for (auto u : users[static_cast<std::size_t>(op.node)])
        r.ops.push_back(ttg.producer_of(u));
      r.name = buffer_label(ttg, op.node) + "~fused";
    } else {
      r.name = buffer_label(ttg, op.node) + "@Op" + std::to_string(o);
    }
    m.buffers.push_back(r);
  }

  for (const auto &b : m.buffers) {
    std::vector<std::vector<BufferCopy>> opts;
    if (b.fused) {
      TileAssignment none;
      TileExtents ex(ttg, none);
      for (int e = 0; e < ex.entries(b.owner, b.fusion_level); ++e)
        opts.push_back({BufferCopy{b.fusion_level, e, 0}});
    } else {
      auto pos = chain_positions(ttg, b.owner);
      std::vector<BufferCopy> chain{BufferCopy{top, 0, top}};
      std::function<void(int, std::size_t)> rec = [&](int storage, std::size_t from) {
        for (std::size_t p = from; p < pos.size(); ++p) {
          if (pos[p].level < storage)
            continue;
          chain.push_back(BufferCopy{pos[p].level, pos[p].entry, storage});
          if (storage == 0)
            opts.push_back(chain);
          else
            rec(storage - 1, p);
          chain.pop_back();
        }
        if (storage > 0)
          rec(storage - 1, from); // no copy at this storage level
      };
      rec(top - 1, 0);
    }
    m.options.push_back(std::move(opts));
  }

  m.constraints = {
      "cover: product of a variable's tile sizes over all levels equals its extent",
      "io: every non-fused buffer keeps its full tensor at (top, entry 0) in the outermost memory",
      "active: exactly one copy of every buffer lives in storage level 0",
      "unique: a buffer has at most one copy per storage level; copies nest outer to inner",
      "fusion: a fused intermediate is created at its fusion level and stored at level 0",
      "capacity: per storage level, the sizes of all copies fit the memory capacity",
      "storage: a copy is never stored above the level that creates it",
  };
  return m;
}

std::optional<ScheduleCost> evaluate_schedule(const MinlpModel &m, const TileAssignment &tiles,
                                              const std::vector<std::vector<BufferCopy>> &placement) {
  const auto &ttg = m.ttg;
  TileExtents ex(ttg, tiles);
  if (!ex.covers())
    return std::nullopt;
  const auto levels = static_cast<std::size_t>(ttg.num_levels);
  ScheduleCost c;
  c.reads.assign(levels, 0.0);
  c.writes.assign(levels, 0.0);
  c.used.assign(levels, 0);

  for (std::size_t bi = 0; bi < m.buffers.size(); ++bi) {
    const auto &b = m.buffers[bi];
    const auto &chain = placement.at(bi);
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const auto &cp = chain[i];
      std::int64_t size = b.elem_bytes;
      for (int v : b.axes)
        size *= ex.extent_at(b.owner, cp.level, cp.entry, v);
      c.used[static_cast<std::size_t>(cp.storage)] += size;
      if (b.fused || i == 0)
        continue;
      double bytes = static_cast<double>(size) * static_cast<double>(ex.trip(b.owner, cp.level, cp.entry));
      for (int l = cp.storage + 1; l <= chain[i - 1].storage; ++l)
        (b.write ? c.writes : c.reads)[static_cast<std::size_t>(l)] += bytes;
    }
  }
  for (std::size_t l = 0; l < levels; ++l) {
    c.t_mem += (c.reads[l] + c.writes[l]) / m.bandwidth(static_cast<int>(l));
    if (c.used[l] > m.capacity(static_cast<int>(l)))
      c.fits = false;
  }

  for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
    const auto &op = ttg.ops[o];
    int oi = static_cast<int>(o);
    Shape tile;
    for (int v : op.vars)
      tile.push_back(ex.extent(oi, 1, v));
    std::int64_t work = tile_work(op.kind, tile);
    int id = ttg.node_of(oi, 1);
    for (int v : ttg.node(1, id).loops)
      if (!op.uses(v))
        work *= ex.tile(1, id, v);
    c.t_comp += static_cast<double>(ex.trip(oi, 1, 0)) * ukernel_time(op.kind, m.units[o], work, m.ukernels);
  }
  c.objective = std::max(c.t_mem, c.t_comp);
  return c;
}

namespace {

struct OptionCost {
  std::size_t index;
  double t;
  std::vector<std::int64_t> used;
};

class Solver {
public:
  Solver(const MinlpModel &m, const SolveOptions &opts) : m_(m), opts_(opts), ex_(m.ttg, tiles_) {
    const auto &ttg = m.ttg;
    domains_ = m.domains;
    if (opts.fixed_tiles) {
      for (std::size_t i = 0; i < m.tile_vars.size(); ++i) {
        auto it = opts.fixed_tiles->find(m.tile_vars[i]);
        domains_[i] = {it == opts.fixed_tiles->end() ? 1 : it->second};
      }
    }
    // Tile variables that scale each (operator, variable) pair.
    for (std::size_t o = 0; o < ttg.ops.size(); ++o)
      for (int v : ttg.ops[o].vars) {
        Pair p;
        p.dim = ttg.var_extent.at(static_cast<std::size_t>(v));
        p.base = 1;
        for (std::size_t i = 0; i < m.tile_vars.size(); ++i) {
          const auto &k = m.tile_vars[i];
          if (k.var == v && ttg.node_of(static_cast<int>(o), k.level) == k.node)
            p.keys.push_back(i);
        }
        if (p.keys.empty())
          p.base = p.dim;
        pairs_.push_back(p);
      }
    // Compute-time bound: a level-1 tile of op o runs once per combination
    // of its loops at levels >= 2, and the total work is at least the op's
    // full iteration space.
    bound_ok_ = true;
    for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
      const auto &op = ttg.ops[o];
      const auto &e = m.ukernels.entries.at({op_name(op.kind.op), m.units[o]});
      bound_ok_ = bound_ok_ && e.base >= 0.0 && e.per_element >= 0.0;
      Shape full;
      for (int v : op.vars)
        full.push_back(ttg.var_extent.at(static_cast<std::size_t>(v)));
      OpBound b;
      b.base = e.base;
      b.work = e.per_element * static_cast<double>(tile_work(op.kind, full));
      for (std::size_t i = 0; i < m.tile_vars.size(); ++i) {
        const auto &k = m.tile_vars[i];
        if (k.level >= 2 && ttg.node_of(static_cast<int>(o), k.level) == k.node)
          b.keys.push_back(i);
      }
      op_bounds_.push_back(std::move(b));
    }
    touching_.resize(m.tile_vars.size());
    for (std::size_t p = 0; p < pairs_.size(); ++p)
      for (auto i : pairs_[p].keys)
        touching_[i].push_back(p);
    value_.assign(m.tile_vars.size(), 1);

    // Variables are searched operator by operator, so each operator's
    // buffers become exactly priced as soon as its own chain is assigned.
    const std::size_t n = m.tile_vars.size();
    pos_.assign(n, n);
    op_keys_.resize(ttg.ops.size());
    for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto &k = m.tile_vars[i];
        if (ttg.node_of(static_cast<int>(o), k.level) != k.node)
          continue;
        op_keys_[o].push_back(i);
        if (pos_[i] == n) {
          pos_[i] = order_.size();
          order_.push_back(i);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (pos_[i] == n) {
        pos_[i] = order_.size();
        order_.push_back(i);
      }
    completing_.resize(n);
    mem_lb_.assign(ttg.ops.size(), 0.0);
    for (std::size_t o = 0; o < ttg.ops.size(); ++o) {
      mem_lb_[o] = std::numeric_limits<double>::infinity();
      op_min_mem(o, 0);
      if (op_keys_[o].empty())
        continue;
      std::size_t last = 0;
      for (auto k : op_keys_[o])
        last = std::max(last, pos_[k]);
      completing_[last].push_back(o);
    }
    mem_now_ = mem_lb_;
    for (auto &v : value_)
      v = 1;
  }

  MinlpSolution run() {
    assign(0);
    if (!found_)
      throw Error(ErrorCode::Infeasible, "no tiling and placement fits the memory hierarchy");
    MinlpSolution s;
    s.tiles = best_tiles_;
    s.placement = best_placement_;
    s.cost = *evaluate_schedule(m_, s.tiles, s.placement);
    s.objective = s.cost.objective;
    s.optimal = !truncated_;
    s.explored = leaves_;
    if (truncated_)
      log_warn("minlp: node limit reached after " + std::to_string(leaves_) + " tile assignments");
    return s;
  }

private:
  struct OpBound {
    double base = 0.0;
    double work = 0.0;
    std::vector<std::size_t> keys;
  };

  struct Pair {
    std::int64_t dim = 1, base = 1;
    std::vector<std::size_t> keys;
  };

  bool consistent(std::size_t pos) const {
    for (auto p : touching_[order_[pos]]) {
      const auto &pr = pairs_[p];
      std::int64_t prod = pr.base;
      bool complete = true;
      for (auto k : pr.keys) {
        if (pos_[k] > pos) {
          complete = false;
          continue;
        }
        prod *= value_[k];
      }
      if (complete ? prod != pr.dim : pr.dim % prod != 0)
        return false;
    }
    return true;
  }

  void assign(std::size_t pos) {
    if (truncated_)
      return;
    if (pos == m_.tile_vars.size()) {
      leaf();
      return;
    }
    const std::size_t idx = order_[pos];
    for (auto v : domains_[idx]) {
      value_[idx] = v;
      // Domains ascend and the bound never decreases with a trip count.
      if (found_ && bound_ok_ && comp_bound(pos) >= best_)
        break;
      if (!consistent(pos))
        continue;
      bool feasible = true;
      for (auto o : completing_[pos]) {
        mem_now_[o] = op_mem(o);
        feasible = feasible && std::isfinite(mem_now_[o]);
      }
      if (feasible && !(found_ && mem_bound() >= best_))
        assign(pos + 1);
      for (auto o : completing_[pos])
        mem_now_[o] = mem_lb_[o];
    }
    value_[idx] = 1;
  }

  double comp_bound(std::size_t pos) const {
    double t = 0.0;
    for (const auto &b : op_bounds_) {
      double trips = 1.0;
      for (auto k : b.keys)
        if (pos_[k] <= pos)
          trips *= static_cast<double>(value_[k]);
      t += trips * b.base + b.work;
    }
    return t;
  }

  // Sum over operators of their buffers' cheapest transfer time: exact for
  // operators whose chain is assigned, the precomputed minimum otherwise.
  // Capacity is only checked per buffer, so this never exceeds T_mem.
  double mem_bound() const {
    double t = 0.0;
    for (double v : mem_now_)
      t += v;
    return t;
  }

  // Cheapest individually fitting transfer time of the buffers owned by
  // `o` under the current values of its chain, or infinity.
  double op_mem(std::size_t o) {
    for (auto k : op_keys_[o])
      tiles_[m_.tile_vars[k]] = value_[k];
    double total = 0.0;
    for (std::size_t bi = 0; bi < m_.buffers.size(); ++bi) {
      if (static_cast<std::size_t>(m_.buffers[bi].owner) != o)
        continue;
      double best = std::numeric_limits<double>::infinity();
      OptionCost oc;
      for (std::size_t oi = 0; oi < m_.options[bi].size(); ++oi)
        if (option_cost(bi, oi, oc))
          best = std::min(best, oc.t);
      total += best;
    }
    return total;
  }

  // Enumerates the consistent assignments of `o`'s chain alone.
  void op_min_mem(std::size_t o, std::size_t i) {
    const auto &keys = op_keys_[o];
    if (i == keys.size()) {
      for (const auto &pr : pairs_) {
        bool mine = !pr.keys.empty() && std::all_of(pr.keys.begin(), pr.keys.end(), [&](std::size_t k) {
          return std::find(keys.begin(), keys.end(), k) != keys.end();
        });
        if (!mine)
          continue;
        std::int64_t prod = pr.base;
        for (auto k : pr.keys)
          prod *= value_[k];
        if (prod != pr.dim)
          return;
      }
      mem_lb_[o] = std::min(mem_lb_[o], op_mem(o));
      return;
    }
    for (auto v : domains_[keys[i]]) {
      value_[keys[i]] = v;
      op_min_mem(o, i + 1);
    }
    value_[keys[i]] = 1;
  }

  bool option_cost(std::size_t bi, std::size_t oi, OptionCost &oc) const {
    const auto &b = m_.buffers[bi];
    const auto &chain = m_.options[bi][oi];
    oc.index = oi;
    oc.t = 0.0;
    oc.used.assign(static_cast<std::size_t>(m_.ttg.num_levels), 0);
    bool fits = true;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const auto &cp = chain[i];
      std::int64_t size = b.elem_bytes;
      for (int v : b.axes)
        size *= ex_.extent_at(b.owner, cp.level, cp.entry, v);
      oc.used[static_cast<std::size_t>(cp.storage)] += size;
      if (oc.used[static_cast<std::size_t>(cp.storage)] > m_.capacity(cp.storage))
        fits = false;
      if (b.fused || i == 0)
        continue;
      double bytes = static_cast<double>(size) * static_cast<double>(ex_.trip(b.owner, cp.level, cp.entry));
      for (int l = cp.storage + 1; l <= chain[i - 1].storage; ++l)
        oc.t += bytes / m_.bandwidth(l);
    }
    return fits;
  }

  void leaf() {
    if (++leaves_ > opts_.node_limit) {
      truncated_ = true;
      return;
    }
    tiles_.clear();
    for (std::size_t i = 0; i < m_.tile_vars.size(); ++i)
      tiles_[m_.tile_vars[i]] = value_[i];

    // Compute time is fixed by the tiles; placement only moves T_mem.
    auto probe = evaluate_schedule(m_, tiles_, first_placement());
    if (!probe)
      return;
    double t_comp = probe->t_comp;
    if (found_ && t_comp >= best_)
      return;

    const auto levels = static_cast<std::size_t>(m_.ttg.num_levels);
    costs_.assign(m_.buffers.size(), {});
    std::vector<double> suffix(m_.buffers.size() + 1, 0.0);
    for (std::size_t bi = 0; bi < m_.buffers.size(); ++bi) {
      for (std::size_t oi = 0; oi < m_.options[bi].size(); ++oi) {
        OptionCost oc;
        if (option_cost(bi, oi, oc))
          costs_[bi].push_back(std::move(oc));
      }
      if (costs_[bi].empty())
        return;
      std::stable_sort(costs_[bi].begin(), costs_[bi].end(),
                       [](const OptionCost &a, const OptionCost &b) { return a.t < b.t; });
    }
    for (std::size_t bi = m_.buffers.size(); bi-- > 0;)
      suffix[bi] = suffix[bi + 1] + costs_[bi].front().t;
    if (found_ && std::max(t_comp, suffix[0]) >= best_)
      return;

    used_.assign(levels, 0);
    chosen_.assign(m_.buffers.size(), 0);
    t_comp_ = t_comp;
    suffix_ = std::move(suffix);
    place(0, 0.0);
  }

  std::vector<std::vector<BufferCopy>> first_placement() const {
    std::vector<std::vector<BufferCopy>> p;
    for (const auto &o : m_.options)
      p.push_back(o.front());
    return p;
  }

  void place(std::size_t bi, double t_mem) {
    if (found_ && std::max(t_comp_, t_mem + suffix_[bi]) >= best_)
      return;
    if (bi == m_.buffers.size()) {
      std::vector<std::vector<BufferCopy>> placement;
      for (std::size_t b = 0; b < chosen_.size(); ++b)
        placement.push_back(m_.options[b][chosen_[b]]);
      auto c = evaluate_schedule(m_, tiles_, placement);
      if (!c || !c->fits || (found_ && c->objective >= best_))
        return;
      found_ = true;
      best_ = c->objective;
      best_tiles_ = tiles_;
      best_placement_ = std::move(placement);
      return;
    }
    for (const auto &oc : costs_[bi]) {
      bool fits = true;
      for (std::size_t l = 0; l < used_.size(); ++l)
        if (used_[l] + oc.used[l] > m_.capacity(static_cast<int>(l)))
          fits = false;
      if (!fits)
        continue;
      for (std::size_t l = 0; l < used_.size(); ++l)
        used_[l] += oc.used[l];
      chosen_[bi] = oc.index;
      place(bi + 1, t_mem + oc.t);
      for (std::size_t l = 0; l < used_.size(); ++l)
        used_[l] -= oc.used[l];
    }
  }

  const MinlpModel &m_;
  SolveOptions opts_;
  TileAssignment tiles_;
  TileExtents ex_;
  std::vector<std::vector<std::int64_t>> domains_;
  std::vector<Pair> pairs_;
  std::vector<std::vector<std::size_t>> touching_;
  std::vector<OpBound> op_bounds_;
  bool bound_ok_ = true;
  std::vector<std::int64_t> value_;
  std::vector<std::size_t> order_; // search position -> tile variable
  std::vector<std::size_t> pos_;   // tile variable -> search position
  std::vector<std::vector<std::size_t>> op_keys_;
  std::vector<std::vector<std::size_t>> completing_;
  std::vector<double> mem_lb_, mem_now_;

  std::vector<std::vector<OptionCost>> costs_;
  std::vector<double> suffix_;
  std::vector<std::int64_t> used_;
  std::vector<std::size_t> chosen_;
  double t_comp_ = 0.0;

  bool found_ = false;
  bool truncated_ = false;
  double best_ = std::numeric_limits<double>::infinity();
  std::int64_t leaves_ = 0;
  TileAssignment best_tiles_;
  std::vector<std::vector<BufferCopy>> best_placement_;
};

} // namespace

MinlpSolution solve(const MinlpModel &m, const SolveOptions &opts) { return Solver(m, opts).run(); }

TileAssignment single_op_tiles(const TieredTileGraph &ttg, const std::vector<std::vector<std::int64_t>> &per_level) {
  if (ttg.ops.empty())
    throw Error(ErrorCode::Validation, "tile graph has no operators");
  const auto &op = ttg.ops[0];
  TileAssignment t;
  std::vector<std::int64_t> below(op.vars.size(), 1);
  for (int n = 1; n < ttg.top(); ++n) {
    const auto &row = per_level.at(static_cast<std::size_t>(n - 1));
    for (std::size_t i = 0; i < op.vars.size(); ++i) {
      t[TileKey{n, ttg.node_of(0, n), op.vars[i]}] = row.at(i);
      below[i] *= row.at(i);
    }
  }
  for (std::size_t i = 0; i < op.vars.size(); ++i) {
    auto dim = ttg.var_extent.at(static_cast<std::size_t>(op.vars[i]));
    if (dim % below[i] != 0)
      throw Error(ErrorCode::Validation, "tile sizes do not divide the iteration space");
    t[TileKey{ttg.top(), ttg.node_of(0, ttg.top()), op.vars[i]}] = dim / below[i];
  }
  return t;
}

std::string MinlpSolution::table(const MinlpModel &m) const {
  const auto &ttg = m.ttg;
  std::ostringstream os;
  os << "tile sizes (trip count per loop)\n";
  for (const auto &[k, v] : tiles)
    os << "  Op_" << k.node << "^" << k.level << " " << ttg.var_names[static_cast<std::size_t>(k.var)] << " = " << v
       << "\n";
  os << "buffer copies (level, entry -> storage)\n";
  for (std::size_t b = 0; b < placement.size(); ++b) {
    os << "  " << m.buffers[b].name << ":";
    for (const auto &c : placement[b])
      os << " (" << c.level << "," << c.entry << ")->" << m.hw.levels[m.mem_level[static_cast<std::size_t>(c.storage)]].name;
    os << "\n";
  }
  os << "traffic bytes per level\n";
  for (std::size_t l = 0; l < cost.reads.size(); ++l)
    os << "  " << m.hw.levels[m.mem_level[l]].name << ": read " << cost.reads[l] << " write " << cost.writes[l]
       << " used " << cost.used[l] << "\n";
  os << "T_comp " << cost.t_comp << " s, T_mem " << cost.t_mem << " s, objective " << objective << " s"
     << (optimal ? "" : " (not proven optimal)") << "\n";
  return os.str();
}

nlohmann::json MinlpSolution::to_json(const MinlpModel &m) const {
  const auto &ttg = m.ttg;
  nlohmann::json j;
  j["objective"] = objective;
  j["t_comp"] = cost.t_comp;
  j["t_mem"] = cost.t_mem;
  j["optimal"] = optimal;
  j["explored"] = explored;
  j["tiles"] = nlohmann::json::array();
  for (const auto &[k, v] : tiles)
    j["tiles"].push_back({{"level", k.level},
                          {"node", k.node},
                          {"var", ttg.var_names[static_cast<std::size_t>(k.var)]},
                          {"trip", v}});
  j["buffers"] = nlohmann::json::array();
  for (std::size_t b = 0; b < placement.size(); ++b) {
    nlohmann::json copies = nlohmann::json::array();
    for (const auto &c : placement[b])
      copies.push_back({{"level", c.level}, {"entry", c.entry}, {"storage", c.storage}});
    j["buffers"].push_back({{"name", m.buffers[b].name}, {"fused", m.buffers[b].fused}, {"copies", copies}});
  }
  j["traffic"] = nlohmann::json::array();
  for (std::size_t l = 0; l < cost.reads.size(); ++l)
    j["traffic"].push_back({{"memory", m.hw.levels[m.mem_level[l]].name},
                            {"read_bytes", cost.reads[l]},
                            {"write_bytes", cost.writes[l]},
                            {"used_bytes", cost.used[l]}});
  return j;
}

} // namespace minicase
